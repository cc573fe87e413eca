#include "tvp/dataset.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "tvp/error.hpp"
#include "tvp/png_io.hpp"

namespace tvp {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Scope scope) {
  return scope == Scope::global ? "global" : "local";
}

Scope scope_from_string(std::string_view name) {
  if (name == "local") return Scope::local;
  if (name == "global") return Scope::global;
  throw Error(ErrorCode::malformed_manifest, "unknown scope '" + std::string(name) + "'");
}

bool PlantedObject::covers(int x, int y) const {
  const int dx = x - cx;
  const int dy = y - cy;
  if (shape == ObjectShape::square) return std::abs(dx) <= radius && std::abs(dy) <= radius;
  return dx * dx + dy * dy <= radius * radius;
}

std::vector<std::string> DatasetManifest::image_ids() const {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.image_path);
  return {ids.begin(), ids.end()};
}

namespace {

json region_to_json(const RegionSpec& r) {
  return json{{"kind", std::string(to_string(r.kind))},
              {"x0", r.box.x0},
              {"y0", r.box.y0},
              {"x1", r.box.x1},
              {"y1", r.box.y1}};
}

json manifest_to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json j{{"id", s.id},
           {"image_path", s.image_path},
           {"question", s.question},
           {"answer", s.answer},
           {"scope", std::string(to_string(s.scope))}};
    if (s.region.kind == RegionKind::mask) {
      j["mask_path"] = s.mask_path;
    } else {
      j["region"] = region_to_json(s.region);
      if (!s.mask_path.empty()) j["mask_path"] = s.mask_path;
    }
    samples.push_back(std::move(j));
  }
  json out{{"name", m.name},
           {"split", m.split},
           {"image_size", {m.image_height, m.image_width, m.image_channels}},
           {"answers", m.answers},
           {"provenance", m.provenance},
           {"samples", std::move(samples)}};
  if (!m.class_names.empty()) out["classes"] = m.class_names;
  if (!m.planted.empty()) {
    json planted = json::object();
    for (const auto& [image, objects] : m.planted) {
      json list = json::array();
      for (const auto& o : objects) {
        list.push_back({{"class", o.class_index},
                        {"cx", o.cx},
                        {"cy", o.cy},
                        {"radius", o.radius},
                        {"shape", o.shape == ObjectShape::disc ? "disc" : "square"}});
      }
      planted[image] = std::move(list);
    }
    out["planted_objects"] = std::move(planted);
  }
  return out;
}

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::malformed_manifest, where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_manifest, where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

void write_dataset(const DatasetManifest& manifest, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::io_error, "cannot create output directory " + dir.string());
  }
  std::set<std::string> written;
  for (const auto& s : manifest.samples) {
    if (written.insert(s.image_path).second) {
      if (!s.image) throw Error(ErrorCode::io_error, "sample " + s.id + " has no image data");
      write_png(dir / s.image_path, *s.image);
    }
    if (!s.mask_path.empty()) {
      write_mask_png(dir / s.mask_path,
                     rasterize_region(s.region, manifest.image_height, manifest.image_width));
    }
  }
  save_manifest(manifest, dir / (manifest.split + ".json"));
}

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::missing_file, "manifest " + path.string());
  json j;
  {
    std::ifstream in(path, std::ios::binary);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::malformed_manifest, path.string() + ": " + e.what());
    }
  }
  const std::string where = path.string();
  DatasetManifest m;
  m.base_dir = path.parent_path();
  m.name = require<std::string>(j, "name", where);
  m.split = require<std::string>(j, "split", where);
  auto size = require<std::vector<int>>(j, "image_size", where);
  if (size.size() != 3 || size[0] <= 0 || size[1] <= 0 || size[2] != 3) {
    throw Error(ErrorCode::malformed_manifest, where + ": image_size must be [H, W, 3]");
  }
  m.image_height = size[0];
  m.image_width = size[1];
  m.image_channels = size[2];
  m.answers = require<std::vector<std::string>>(j, "answers", where);
  m.provenance = j.value("provenance", std::string("external"));
  if (j.contains("classes")) m.class_names = j["classes"].get<std::vector<std::string>>();
  if (j.contains("planted_objects")) {
    for (const auto& [image, list] : j["planted_objects"].items()) {
      auto& objects = m.planted[image];
      for (const auto& o : list) {
        objects.push_back({o.at("class").get<int>(), o.at("cx").get<int>(), o.at("cy").get<int>(),
                           o.at("radius").get<int>(),
                           o.at("shape").get<std::string>() == "disc" ? ObjectShape::disc
                                                                      : ObjectShape::square});
      }
    }
  }

  const std::set<std::string> answer_set(m.answers.begin(), m.answers.end());
  std::set<std::string> ids;
  std::map<std::string, std::shared_ptr<const Image>> images;
  for (const auto& js : require<json>(j, "samples", where)) {
    VQASample s;
    s.id = require<std::string>(js, "id", where);
    const std::string sw = where + ": sample " + s.id;
    if (!ids.insert(s.id).second) throw Error(ErrorCode::duplicate_id, sw);
    s.image_path = require<std::string>(js, "image_path", sw);
    s.question = require<std::string>(js, "question", sw);
    s.answer = require<std::string>(js, "answer", sw);
    s.scope = scope_from_string(require<std::string>(js, "scope", sw));
    s.mask_path = js.value("mask_path", std::string());
    if (!answer_set.count(s.answer)) {
      throw Error(ErrorCode::malformed_manifest, sw + ": answer '" + s.answer + "' not in vocabulary");
    }

    const fs::path image_file = m.base_dir / s.image_path;
    if (!fs::exists(image_file)) {
      throw Error(ErrorCode::missing_file, sw + ": image " + image_file.string());
    }
    if (!s.mask_path.empty() && !fs::exists(m.base_dir / s.mask_path)) {
      throw Error(ErrorCode::missing_file,
                  sw + ": mask " + (m.base_dir / s.mask_path).string());
    }
    if (js.contains("region")) {
      const json& r = js["region"];
      const auto kind = region_kind_from_string(require<std::string>(r, "kind", sw));
      if (kind == RegionKind::mask) {
        s.region = RegionSpec::from_mask_file(m.base_dir / require<std::string>(r, "path", sw));
      } else {
        s.region = {kind,
                    {require<int>(r, "x0", sw), require<int>(r, "y0", sw), require<int>(r, "x1", sw),
                     require<int>(r, "y1", sw)},
                    nullptr};
        s.region.validate(m.image_height, m.image_width);
      }
    } else if (!s.mask_path.empty()) {
      s.region = RegionSpec::from_mask_file(m.base_dir / s.mask_path);
    } else {
      throw Error(ErrorCode::malformed_manifest, sw + ": needs 'region' or 'mask_path'");
    }

    auto& img = images[s.image_path];
    if (!img) {
      auto decoded = std::make_shared<Image>(read_png(image_file));
      if (decoded->height != m.image_height || decoded->width != m.image_width) {
        throw Error(ErrorCode::dimension_mismatch, sw + ": image size differs from manifest");
      }
      img = std::move(decoded);
    }
    s.image = img;
    m.samples.push_back(std::move(s));
  }
  return m;
}

void check_split_hygiene(const std::vector<DatasetManifest>& splits) {
  std::map<std::string, std::string> owner;
  for (const auto& m : splits) {
    for (const auto& id : m.image_ids()) {
      auto [it, inserted] = owner.emplace(id, m.split);
      if (!inserted && it->second != m.split) {
        throw Error(ErrorCode::split_leakage,
                    "image " + id + " appears in splits " + it->second + " and " + m.split);
      }
    }
  }
}

bool same_samples(const DatasetManifest& a, const DatasetManifest& b) {
  if (a.name != b.name || a.split != b.split || a.image_height != b.image_height ||
      a.image_width != b.image_width || a.answers != b.answers || a.provenance != b.provenance ||
      a.samples.size() != b.samples.size() || a.planted != b.planted ||
      a.class_names != b.class_names) {
    return false;
  }
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const auto& x = a.samples[i];
    const auto& y = b.samples[i];
    if (x.id != y.id || x.image_path != y.image_path || x.question != y.question ||
        x.answer != y.answer || x.scope != y.scope || x.mask_path != y.mask_path) {
      return false;
    }
    if (x.region.kind != y.region.kind) return false;
    if (x.region.kind == RegionKind::mask) {
      if (!(x.region.mask() == y.region.mask())) return false;
    } else if (!(x.region.box == y.region.box)) {
      return false;
    }
    if ((x.image == nullptr) != (y.image == nullptr)) return false;
    if (x.image && !(*x.image == *y.image)) return false;
  }
  return true;
}

}  // namespace tvp
