#include "tvp/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "tvp/checkpoint.hpp"
#include "tvp/error.hpp"
#include "tvp/png_io.hpp"

namespace tvp {

std::string normalize_answer(std::string_view text) {
  std::string out;
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch) || std::ispunct(ch)) continue;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::tp: return "TP";
    case Category::fp: return "FP";
    case Category::tn: return "TN";
    case Category::fn: return "FN";
  }
  return "TN";
}

Category category_from_string(std::string_view name) {
  for (Category c : kCategories) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::malformed_manifest, "unknown category '" + std::string(name) + "'");
}

Category categorize(std::string_view prediction, std::string_view gold) {
  const std::string p = normalize_answer(prediction);
  const std::string g = normalize_answer(gold);
  if (g == kPositiveAnswer) return p == g ? Category::tp : Category::fn;
  return p == g ? Category::tn : Category::fp;
}

void ConfusionCounts::add(Category c) {
  switch (c) {
    case Category::tp: ++tp; break;
    case Category::fp: ++fp; break;
    case Category::tn: ++tn; break;
    case Category::fn: ++fn; break;
  }
}

Metrics metrics_from_counts(const ConfusionCounts& counts) {
  Metrics m;
  m.counts = counts;
  const long n = counts.total();
  m.accuracy = n ? static_cast<double>(counts.tp + counts.tn) / static_cast<double>(n) : 0.0;
  const long denom = 2 * counts.tp + counts.fp + counts.fn;
  m.f1 = denom ? 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denom) : 0.0;
  return m;
}

Metrics compute_metrics(const std::vector<std::string>& predictions, const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::length_mismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                std::to_string(golds.size()) + " answers");
  }
  if (predictions.empty()) throw Error(ErrorCode::length_mismatch, "no predictions to score");
  ConfusionCounts counts;
  for (std::size_t i = 0; i < predictions.size(); ++i) counts.add(categorize(predictions[i], golds[i]));
  return metrics_from_counts(counts);
}

ErrorMap build_error_map(const std::vector<VQASample>& samples, const std::vector<std::string>& predictions,
                         int height, int width) {
  if (samples.size() != predictions.size()) {
    throw Error(ErrorCode::length_mismatch, "samples and predictions differ in length");
  }
  ErrorMap map;
  map.height = height;
  map.width = width;
  const auto cells = static_cast<std::size_t>(height) * width;
  std::array<std::vector<long>, 4> sums;
  for (auto& s : sums) s.assign(cells, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int c = static_cast<int>(categorize(predictions[i], samples[i].answer));
    ++map.counts[c];
    const Mask mask = rasterize_region(samples[i].region, height, width);
    for (std::size_t k = 0; k < cells; ++k) sums[c][k] += mask.bits[k];
  }
  for (int c = 0; c < 4; ++c) {
    const long peak = *std::max_element(sums[c].begin(), sums[c].end());
    map.grids[c].assign(cells, 0.0);
    if (peak == 0) continue;
    for (std::size_t k = 0; k < cells; ++k) {
      map.grids[c][k] = static_cast<double>(sums[c][k]) / static_cast<double>(peak);
    }
  }
  return map;
}

void check_compatible(const Checkpoint& ckpt, const DatasetManifest& manifest) {
  for (const auto& a : manifest.answers) {
    for (const auto& w : split_words(a)) {
      if (!ckpt.vocab.contains(w)) {
        throw Error(ErrorCode::vocabulary_mismatch,
                    "answer word '" + w + "' of " + manifest.name + "/" + manifest.split +
                        " is not in the checkpoint vocabulary");
      }
    }
  }
  if (manifest.image_height != ckpt.model.config().image_size ||
      manifest.image_width != ckpt.model.config().image_size) {
    throw Error(ErrorCode::dimension_mismatch, "manifest images do not match the checkpoint image size");
  }
}

std::vector<Prediction> predict(const Checkpoint& ckpt, const DatasetManifest& manifest, int workers) {
  check_compatible(ckpt, manifest);
  const auto n = manifest.samples.size();
  std::vector<Prediction> out(n);
  const int visual_tokens = ckpt.model.config().visual_tokens();
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const VQASample& s = manifest.samples[i];
      auto prompt = assemble_prompt(s, ckpt.mode, ckpt.prompt_template, ckpt.assembly);
      const auto tokens = tokenize(prompt, ckpt.vocab, visual_tokens);
      const auto words = generate(ckpt.model, tokens, ckpt.vocab, ckpt.decode);
      Prediction& p = out[i];
      p.id = s.id;
      p.prediction = normalize_answer(join_words(words));
      p.answer = s.answer;
      p.category = categorize(p.prediction, p.answer);
    }
  };
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    run(0, n);
    return out;
  }
  std::vector<std::thread> threads;
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t b = 0; b < n; b += chunk) threads.emplace_back(run, b, std::min(n, b + chunk));
  for (auto& t : threads) t.join();
  return out;
}

ReportRow summarize(const std::string& mode, const std::vector<Prediction>& dump) {
  ConfusionCounts counts;
  for (const auto& p : dump) counts.add(categorize(p.prediction, p.answer));
  const Metrics m = metrics_from_counts(counts);
  return {mode, m.accuracy, m.f1, counts.total()};
}

EvalReport compare_baselines(const std::vector<std::pair<std::string, const Checkpoint*>>& checkpoints,
                             const DatasetManifest& test, int workers) {
  EvalReport report;
  report.dataset = test.name + "/" + test.split;
  for (const auto& [label, ckpt] : checkpoints) check_compatible(*ckpt, test);
  for (const auto& [label, ckpt] : checkpoints) {
    auto dump = predict(*ckpt, test, workers);
    report.rows.push_back(summarize(label, dump));
    report.dumps.push_back(std::move(dump));
  }
  return report;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "mode,accuracy,f1,n\n" << std::fixed << std::setprecision(6);
  for (const auto& r : report.rows) out << r.mode << ',' << r.accuracy << ',' << r.f1 << ',' << r.n << '\n';
}

void write_dump_json(const std::vector<Prediction>& dump, const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : dump) {
    j.push_back({{"id", p.id},
                 {"prediction", p.prediction},
                 {"answer", p.answer},
                 {"category", std::string(to_string(p.category))}});
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<Prediction> read_dump_json(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::missing_file, "dump " + path.string());
  std::ifstream in(path);
  std::vector<Prediction> out;
  try {
    for (const auto& e : nlohmann::json::parse(in)) {
      out.push_back({e.at("id").get<std::string>(), e.at("prediction").get<std::string>(),
                     e.at("answer").get<std::string>(),
                     category_from_string(e.at("category").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_manifest, path.string() + ": " + e.what());
  }
  return out;
}

void write_error_map(const ErrorMap& map, const std::filesystem::path& dir, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (Category c : kCategories) {
    const auto& grid = map.grid(c);
    const std::string stem = prefix + "_" + std::string(to_string(c));
    std::ofstream csv(dir / (stem + ".csv"));
    if (!csv) throw Error(ErrorCode::io_error, "cannot write " + (dir / (stem + ".csv")).string());
    csv << std::setprecision(6);
    std::vector<std::uint8_t> gray(grid.size());
    for (int y = 0; y < map.height; ++y) {
      for (int x = 0; x < map.width; ++x) {
        const double v = grid[static_cast<std::size_t>(y) * map.width + x];
        csv << (x ? "," : "") << v;
        gray[static_cast<std::size_t>(y) * map.width + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
      csv << '\n';
    }
    write_gray_png(dir / (stem + ".png"), map.height, map.width, gray);
  }
}

std::vector<VQASample> samples_for_dump(const DatasetManifest& manifest, const std::vector<Prediction>& dump) {
  std::map<std::string, const VQASample*> by_id;
  for (const auto& s : manifest.samples) by_id[s.id] = &s;
  std::vector<VQASample> out;
  out.reserve(dump.size());
  for (const auto& p : dump) {
    auto it = by_id.find(p.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::malformed_manifest, "dump id " + p.id + " is not in the manifest");
    }
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace tvp
