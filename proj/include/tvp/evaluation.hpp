#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tvp/dataset.hpp"

namespace tvp {

struct Checkpoint;

// Lower-case; punctuation and whitespace removed.
std::string normalize_answer(std::string_view text);

enum class Category { tp, fp, tn, fn };
inline constexpr Category kCategories[] = {Category::tp, Category::fp, Category::tn, Category::fn};
std::string_view to_string(Category c);
Category category_from_string(std::string_view name);

inline constexpr std::string_view kPositiveAnswer = "yes";

// Positive class is "yes". A prediction that does not match the gold answer is an error: a
// wrong answer to a "yes" question is a false negative, to any other question a false positive.
Category categorize(std::string_view prediction, std::string_view gold);

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
  void add(Category c);
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double f1 = 0.0;  // 0 when 2tp + fp + fn == 0
};

Metrics metrics_from_counts(const ConfusionCounts& counts);
// Throws length_mismatch on unequal or empty inputs. Both sides are normalized first.
Metrics compute_metrics(const std::vector<std::string>& predictions, const std::vector<std::string>& golds);

struct ErrorMap {
  int height = 0;
  int width = 0;
  std::array<std::vector<double>, 4> grids;  // indexed by Category, row-major
  std::array<long, 4> counts{};

  const std::vector<double>& grid(Category c) const { return grids[static_cast<int>(c)]; }
  double at(Category c, int y, int x) const { return grid(c)[static_cast<std::size_t>(y) * width + x]; }
};

// Sums the rasterized region masks per category and divides each grid by its maximum.
ErrorMap build_error_map(const std::vector<VQASample>& samples, const std::vector<std::string>& predictions,
                         int height, int width);

struct Prediction {
  std::string id;
  std::string prediction;
  std::string answer;
  Category category = Category::tn;
};

struct ReportRow {
  std::string mode;
  double accuracy = 0.0;
  double f1 = 0.0;
  long n = 0;
};

struct EvalReport {
  std::string dataset;
  std::vector<ReportRow> rows;
  std::vector<std::vector<Prediction>> dumps;  // parallel to rows
};

// Greedy generation for every sample with the checkpoint's own prompt mode. Results are in
// manifest order regardless of `workers`.
std::vector<Prediction> predict(const Checkpoint& ckpt, const DatasetManifest& manifest, int workers = 1);

ReportRow summarize(const std::string& mode, const std::vector<Prediction>& dump);

// Throws vocabulary_mismatch / dimension_mismatch when the checkpoint cannot read the manifest.
void check_compatible(const Checkpoint& ckpt, const DatasetManifest& manifest);

EvalReport compare_baselines(const std::vector<std::pair<std::string, const Checkpoint*>>& checkpoints,
                             const DatasetManifest& test, int workers = 1);

// Report files.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_dump_json(const std::vector<Prediction>& dump, const std::filesystem::path& path);
std::vector<Prediction> read_dump_json(const std::filesystem::path& path);
// Writes <prefix>_<category>.csv and <prefix>_<category>.png for all four categories.
void write_error_map(const ErrorMap& map, const std::filesystem::path& dir, const std::string& prefix);

// Samples aligned with a dump by id; throws malformed_manifest on unknown ids.
std::vector<VQASample> samples_for_dump(const DatasetManifest& manifest, const std::vector<Prediction>& dump);

}  // namespace tvp
