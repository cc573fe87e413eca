#include "tvp/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <nlohmann/json.hpp>

#include "tvp/error.hpp"

namespace tvp {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// uniform_int_distribution is implementation-defined; draw integers directly so files are
// identical across standard libraries.
int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

bool bernoulli(std::mt19937_64& rng, double p) { return uniform01(rng) < p; }

std::string zero_pad(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*d", width, value);
  return buf;
}

bool core_covers(const PlantedObject& o, double fraction, int x, int y) {
  if (!o.covers(x, y)) return false;
  const double r = fraction * o.radius;
  const double dx = x - o.cx;
  const double dy = y - o.cy;
  if (o.shape == ObjectShape::disc) return dx * dx + dy * dy <= r * r;
  return std::max(std::abs(dx), std::abs(dy)) <= r;
}

// Share of negative cues that show another class's rim rather than a nearby target.
constexpr double kDistractorCueShare = 0.75;

enum class Cue { none, partial_target, partial_distractor, adjacent_target };

struct RegionRequest {
  bool yes = true;
  int class_index = 0;
  Cue cue = Cue::none;
  bool size_biased = false;
  bool location_biased = false;
};

class ImageScene {
 public:
  ImageScene(const GeneratorConfig& cfg, std::vector<PlantedObject> objects)
      : cfg_(cfg), size_(cfg.image_size), objects_(std::move(objects)),
        owner_(static_cast<std::size_t>(size_) * size_, -1), core_(owner_.size(), 0) {
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        for (std::size_t i = 0; i < objects_.size(); ++i) {
          if (objects_[i].covers(x, y)) {
            owner_[y * size_ + x] = static_cast<int>(i);
            core_[y * size_ + x] = core_covers(objects_[i], cfg.core_fraction, x, y) ? 1 : 0;
            break;
          }
        }
      }
    }
  }

  bool has_class(int c) const {
    return std::any_of(objects_.begin(), objects_.end(),
                       [c](const PlantedObject& o) { return o.class_index == c; });
  }

  std::vector<int> objects_of(int c, bool matching) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if ((objects_[i].class_index == c) == matching) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  // Returns nullopt when no region satisfying the request could be found.
  std::optional<RegionSpec> place(std::mt19937_64& rng, const RegionRequest& req) const {
    constexpr int kAttempts = 400;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      RegionSpec r = propose(rng, req);
      if (accepts(r, req)) return r;
    }
    return std::nullopt;
  }

 private:
  RegionSpec propose(std::mt19937_64& rng, const RegionRequest& req) const {
    const bool ellipse = bernoulli(rng, cfg_.ellipse_fraction);
    int lo = cfg_.min_region;
    int hi = cfg_.max_region;
    if (req.size_biased) {
      const int mid = (lo + hi) / 2;
      if (req.yes) lo = mid; else hi = mid;
    }
    const int w = uniform_int(rng, lo, hi);
    const int h = uniform_int(rng, lo, hi);

    int anchor = -1;
    std::vector<int> pool;
    switch (req.cue) {
      case Cue::none:
        if (req.yes) pool = objects_of(req.class_index, true);
        break;
      case Cue::partial_target:
      case Cue::adjacent_target:
        pool = objects_of(req.class_index, true);
        break;
      case Cue::partial_distractor:
        pool = objects_of(req.class_index, false);
        break;
    }
    if (!pool.empty()) anchor = pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];

    int x0 = 0;
    int y0 = 0;
    if (anchor < 0) {
      x0 = uniform_int(rng, 0, size_ - w);
      y0 = uniform_int(rng, 0, size_ - h);
    } else {
      const PlantedObject& o = objects_[anchor];
      // Range of offsets so the box at least touches the object's bounding square (expanded by
      // the adjacency margin for adjacent cues).
      const int margin = req.cue == Cue::adjacent_target ? 3 : 0;
      const int bx0 = o.cx - o.radius - margin;
      const int bx1 = o.cx + o.radius + margin;
      const int by0 = o.cy - o.radius - margin;
      const int by1 = o.cy + o.radius + margin;
      x0 = std::clamp(uniform_int(rng, bx0 - w + 1, bx1), 0, size_ - w);
      y0 = std::clamp(uniform_int(rng, by0 - h + 1, by1), 0, size_ - h);
    }
    return ellipse ? RegionSpec::ellipse(x0, y0, x0 + w, y0 + h)
                   : RegionSpec::rect(x0, y0, x0 + w, y0 + h);
  }

  bool accepts(const RegionSpec& r, const RegionRequest& req) const {
    const Mask mask = rasterize_region(r, size_, size_);
    // Per object: pixels inside the region, and how many of those belong to the core.
    std::vector<int> inside(objects_.size(), 0);
    std::vector<int> core_inside(objects_.size(), 0);
    for (int y = r.box.y0; y < r.box.y1; ++y) {
      for (int x = r.box.x0; x < r.box.x1; ++x) {
        const int o = owner_[y * size_ + x];
        if (o < 0 || !mask.at(y, x)) continue;
        ++inside[o];
        core_inside[o] += core_[y * size_ + x];
      }
    }
    bool target_inside = false;
    bool target_center_inside = false;
    bool target_core_inside = false;
    bool partial_distractor = false;
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if (inside[i] == 0) continue;
      const PlantedObject& o = objects_[i];
      const bool center_in = mask.at(o.cy, o.cx) != 0;
      if (o.class_index == req.class_index) {
        target_inside = true;
        target_center_inside = target_center_inside || center_in;
        target_core_inside = target_core_inside || core_inside[i] > 0;
      } else if (core_inside[i] == 0) {
        partial_distractor = true;
      }
    }
    if (target_inside != req.yes) return false;

    if (req.location_biased) {
      const int cx = (r.box.x0 + r.box.x1) / 2;
      const int cy = (r.box.y0 + r.box.y1) / 2;
      const bool in_cluster = cx < size_ / 2 && cy < size_ / 2;
      if (in_cluster != req.yes) return false;
    }

    switch (req.cue) {
      case Cue::none:
        return !req.yes || target_center_inside;
      case Cue::partial_target:
        return !target_core_inside;
      case Cue::partial_distractor:
        return partial_distractor;
      case Cue::adjacent_target:
        return target_within(mask, r.box, req.class_index, kAdjacentMargin);
    }
    return false;
  }

  bool target_within(const Mask& mask, const Box& box, int c, int margin) const {
    for (int y = std::max(0, box.y0 - margin); y < std::min(size_, box.y1 + margin); ++y) {
      for (int x = std::max(0, box.x0 - margin); x < std::min(size_, box.x1 + margin); ++x) {
        const int o = owner_[y * size_ + x];
        if (o < 0 || objects_[o].class_index != c) continue;
        for (int yy = std::max(0, y - margin); yy <= std::min(size_ - 1, y + margin); ++yy) {
          for (int xx = std::max(0, x - margin); xx <= std::min(size_ - 1, x + margin); ++xx) {
            if (mask.at(yy, xx)) return true;
          }
        }
      }
    }
    return false;
  }

  static constexpr int kAdjacentMargin = 3;

  const GeneratorConfig& cfg_;
  int size_;
  std::vector<PlantedObject> objects_;
  std::vector<int> owner_;
  std::vector<std::uint8_t> core_;
};

std::vector<PlantedObject> plant_objects(const GeneratorConfig& cfg, std::mt19937_64& rng) {
  const int n = uniform_int(rng, cfg.min_objects, cfg.max_objects);
  std::vector<int> queried;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    if (cfg.classes[c].queried) queried.push_back(static_cast<int>(c));
  }
  std::vector<PlantedObject> objects;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      PlantedObject o;
      // The first object always belongs to a queried class so every image has a yes question.
      o.class_index = i == 0 ? queried[uniform_int(rng, 0, static_cast<int>(queried.size()) - 1)]
                             : uniform_int(rng, 0, static_cast<int>(cfg.classes.size()) - 1);
      const auto& shape = cfg.classes[o.class_index].shape;
      o.shape = shape ? *shape : (uniform_int(rng, 0, 1) == 0 ? ObjectShape::disc : ObjectShape::square);
      o.radius = uniform_int(rng, cfg.min_radius, cfg.max_radius);
      o.cx = uniform_int(rng, o.radius, cfg.image_size - 1 - o.radius);
      o.cy = uniform_int(rng, o.radius, cfg.image_size - 1 - o.radius);
      const bool clear = std::none_of(objects.begin(), objects.end(), [&](const PlantedObject& p) {
        const int gap = o.radius + p.radius + 2;
        return std::abs(o.cx - p.cx) < gap && std::abs(o.cy - p.cy) < gap;
      });
      if (clear) {
        objects.push_back(o);
        break;
      }
    }
  }
  return objects;
}

Image render(const GeneratorConfig& cfg, const std::vector<PlantedObject>& objects,
             std::mt19937_64& rng) {
  const int s = cfg.image_size;
  Image img(s, s);
  const int noise = cfg.background_noise;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      // Faint diagonal weave plus per-pixel noise.
      const int weave = ((x + y) / 4) % 2 == 0 ? 6 : -6;
      for (int c = 0; c < 3; ++c) {
        const int base = 96 + 8 * c + weave;
        img.at(y, x, c) =
            static_cast<std::uint8_t>(std::clamp(base + uniform_int(rng, -noise, noise), 0, 255));
      }
    }
  }
  auto jittered = [&](const Rgb& base) {
    Rgb color;
    for (int c = 0; c < 3; ++c) {
      color[c] = static_cast<std::uint8_t>(
          std::clamp(base[c] + uniform_int(rng, -cfg.color_jitter, cfg.color_jitter), 0, 255));
    }
    return color;
  };
  for (const auto& o : objects) {
    const Rgb rim = jittered(cfg.rim_color);
    const Rgb core = jittered(cfg.classes[o.class_index].color);
    for (int y = o.cy - o.radius; y <= o.cy + o.radius; ++y) {
      for (int x = o.cx - o.radius; x <= o.cx + o.radius; ++x) {
        if (!o.covers(x, y)) continue;
        img.set_pixel(y, x, core_covers(o, cfg.core_fraction, x, y) ? core : rim);
      }
    }
  }
  return img;
}

std::string question_text(const GeneratorConfig& cfg, int c, Scope scope) {
  return "are there " + cfg.classes[c].name + " in this " +
         (scope == Scope::global ? "image" : "region");
}

}  // namespace

std::vector<ObjectClass> GeneratorConfig::default_classes() {
  return {{"rubies", std::nullopt, {210, 40, 60}}, {"sapphires", std::nullopt, {40, 70, 210}}};
}

GeneratorConfig GeneratorConfig::biased() {
  GeneratorConfig cfg;
  cfg.name = "synthetic-biased";
  cfg.region_size_answer_correlation = 0.6;
  cfg.location_cluster_strength = 0.8;
  return cfg;
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
  auto unit = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must be in [0, 1]");
  };
  if (n_images < 1) fail("n_images must be >= 1");
  if (questions_per_image < 1) fail("questions_per_image must be >= 1");
  if (std::none_of(classes.begin(), classes.end(), [](const ObjectClass& c) { return c.queried; })) {
    fail("at least one object class must be queried");
  }
  for (const auto& c : classes) {
    if (c.name.empty() || c.name.find(' ') != std::string::npos) fail("class names must be single words");
  }
  if (image_size < 8) fail("image_size must be >= 8");
  if (min_objects < 1 || max_objects < min_objects) fail("object count range is invalid");
  if (min_radius < 1 || max_radius < min_radius) fail("radius range is invalid");
  if (2 * max_radius + 1 >= image_size) fail("objects do not fit the image");
  if (min_region < 1 || max_region < min_region) fail("region size range is invalid");
  if (max_region >= image_size) fail("region size must be smaller than the image");
  unit(ellipse_fraction, "ellipse_fraction");
  unit(global_question_fraction, "global_question_fraction");
  unit(region_size_answer_correlation, "region_size_answer_correlation");
  unit(location_cluster_strength, "location_cluster_strength");
  unit(context_cue_strength, "context_cue_strength");
  unit(core_fraction, "core_fraction");
  unit(train_fraction, "train_fraction");
  unit(val_fraction, "val_fraction");
  if (train_fraction + val_fraction > 1.0) fail("split fractions exceed 1");
  if (color_jitter < 0 || background_noise < 0) fail("noise amplitudes must be >= 0");
}

std::string GeneratorConfig::hash() const {
  nlohmann::json j;
  j["name"] = name;
  j["image_size"] = image_size;
  j["n_images"] = n_images;
  j["questions_per_image"] = questions_per_image;
  for (const auto& c : classes) {
    const int shape = c.shape ? static_cast<int>(*c.shape) : -1;
    j["classes"].push_back({c.name, shape, c.color, c.queried});
  }
  j["objects"] = {min_objects, max_objects};
  j["radius"] = {min_radius, max_radius};
  j["region"] = {min_region, max_region};
  j["ellipse_fraction"] = ellipse_fraction;
  j["global_question_fraction"] = global_question_fraction;
  j["splits"] = {train_fraction, val_fraction};
  j["bias"] = {region_size_answer_correlation, location_cluster_strength, context_cue_strength};
  j["object_style"] = {rim_color, core_fraction};
  j["noise"] = {color_jitter, background_noise};
  j["seed"] = seed;
  // FNV-1a over the canonical dump.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string("generator:") + buf;
}

bool region_contains_class(const std::vector<PlantedObject>& objects, int class_index,
                           const Mask& region) {
  for (int y = 0; y < region.height; ++y) {
    for (int x = 0; x < region.width; ++x) {
      if (!region.at(y, x)) continue;
      for (const auto& o : objects) {
        if (o.class_index == class_index && o.covers(x, y)) return true;
      }
    }
  }
  return false;
}

GeneratedDataset generate_dataset(const GeneratorConfig& cfg) {
  cfg.validate();
  GeneratedDataset out;
  const char* names[3] = {"train", "val", "test"};
  const int n_train = static_cast<int>(std::lround(cfg.n_images * cfg.train_fraction));
  const int n_val = static_cast<int>(std::lround(cfg.n_images * cfg.val_fraction));
  std::vector<std::string> class_names;
  for (const auto& c : cfg.classes) class_names.push_back(c.name);
  for (int s = 0; s < 3; ++s) {
    auto& m = out.splits[s];
    m.name = cfg.name;
    m.split = names[s];
    m.image_height = m.image_width = cfg.image_size;
    m.answers = {"no", "yes"};
    m.provenance = cfg.hash();
    m.class_names = class_names;
  }

  const int n_classes = static_cast<int>(cfg.classes.size());
  for (int idx = 0; idx < cfg.n_images; ++idx) {
    // Each image owns a substream so images can be generated independently.
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(idx) + 1)));
    const int split = idx < n_train ? 0 : (idx < n_train + n_val ? 1 : 2);
    auto& m = out.splits[split];

    auto objects = plant_objects(cfg, rng);
    auto image = std::make_shared<const Image>(render(cfg, objects, rng));
    const ImageScene scene(cfg, objects);
    const std::string image_id = "img" + zero_pad(idx, 5);
    const std::string image_path = "images/" + image_id + ".png";
    m.planted[image_path] = objects;

    std::vector<int> present;
    std::vector<int> absent;
    for (int c = 0; c < n_classes; ++c) {
      if (cfg.classes[c].queried) (scene.has_class(c) ? present : absent).push_back(c);
    }

    int pair_class = 0;
    for (int q = 0; q < cfg.questions_per_image; ++q) {
      const bool yes = q % 2 == 0;
      if (q % 2 == 0) pair_class = present[uniform_int(rng, 0, static_cast<int>(present.size()) - 1)];

      VQASample sample;
      sample.id = image_id + "-q" + std::to_string(q);
      sample.image_path = image_path;
      sample.image = image;
      sample.answer = yes ? "yes" : "no";
      sample.mask_path = "masks/" + sample.id + ".png";

      const bool global = bernoulli(rng, cfg.global_question_fraction);
      const std::vector<int>& global_pool = yes ? present : absent;
      if (global && !global_pool.empty()) {
        const int c = global_pool[uniform_int(rng, 0, static_cast<int>(global_pool.size()) - 1)];
        sample.scope = Scope::global;
        sample.region = RegionSpec::full(cfg.image_size, cfg.image_size);
        sample.question = question_text(cfg, c, Scope::global);
        m.samples.push_back(std::move(sample));
        continue;
      }

      RegionRequest req;
      req.yes = yes;
      req.class_index = pair_class;
      if (bernoulli(rng, cfg.context_cue_strength)) {
        if (yes) {
          req.cue = Cue::partial_target;
        } else {
          const bool has_distractor = !scene.objects_of(pair_class, false).empty();
          req.cue = has_distractor && bernoulli(rng, kDistractorCueShare) ? Cue::partial_distractor
                                                                         : Cue::adjacent_target;
        }
      }
      req.size_biased = bernoulli(rng, cfg.region_size_answer_correlation);
      req.location_biased = bernoulli(rng, cfg.location_cluster_strength);

      auto region = scene.place(rng, req);
      if (!region) {
        // Relax the optional constraints before giving up.
        req.cue = Cue::none;
        req.size_biased = false;
        req.location_biased = false;
        region = scene.place(rng, req);
      }
      if (!region) {
        throw Error(ErrorCode::invalid_config,
                    "could not place a region for " + sample.id + "; regions may be too large");
      }
      sample.scope = Scope::local;
      sample.region = *region;
      sample.question = question_text(cfg, pair_class, Scope::local);
      m.samples.push_back(std::move(sample));
    }
  }
  return out;
}

GeneratedDataset generate_synthetic_dataset(const GeneratorConfig& cfg,
                                            const std::filesystem::path& out_dir) {
  auto ds = generate_dataset(cfg);
  for (auto& m : ds.splits) {
    write_dataset(m, out_dir);
    m.base_dir = out_dir;
  }
  return ds;
}

}  // namespace tvp
