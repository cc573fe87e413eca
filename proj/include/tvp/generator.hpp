#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tvp/dataset.hpp"

namespace tvp {

struct ObjectClass {
  std::string name;  // plural noun used in questions, e.g. "rubies"
  std::optional<ObjectShape> shape;  // unset: drawn per object
  Rgb color{210, 40, 60};  // core colour
  bool queried = true;     // false: only ever a distractor
};

struct GeneratorConfig {
  std::string name = "synthetic";
  int image_size = 64;
  int n_images = 100;
  int questions_per_image = 4;
  std::vector<ObjectClass> classes = default_classes();
  int min_objects = 1;
  int max_objects = 6;
  int min_radius = 2;
  int max_radius = 8;
  int min_region = 10;  // region side length, pixels
  int max_region = 32;
  double ellipse_fraction = 0.5;
  double global_question_fraction = 0.1;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  // Bias knobs, all in [0, 1].
  double region_size_answer_correlation = 0.0;
  double location_cluster_strength = 0.0;
  double context_cue_strength = 0.0;
  // Objects are a shared rim around a class-coloured core of core_fraction * radius.
  Rgb rim_color{200, 200, 200};
  double core_fraction = 0.5;
  int color_jitter = 20;
  int background_noise = 12;
  std::uint64_t seed = 0;

  static std::vector<ObjectClass> default_classes();
  // Yes-regions cluster in the upper-left quadrant and grow larger.
  static GeneratorConfig biased();

  // Throws invalid_config.
  void validate() const;
  std::string hash() const;
};

struct GeneratedDataset {
  std::array<DatasetManifest, 3> splits;  // train, val, test

  DatasetManifest& train() { return splits[0]; }
  DatasetManifest& val() { return splits[1]; }
  DatasetManifest& test() { return splits[2]; }
  const DatasetManifest& train() const { return splits[0]; }
  const DatasetManifest& val() const { return splits[1]; }
  const DatasetManifest& test() const { return splits[2]; }
};

// In-memory generation; deterministic in cfg (including seed).
GeneratedDataset generate_dataset(const GeneratorConfig& cfg);

// Generates and writes images, masks and one manifest per split into out_dir.
GeneratedDataset generate_synthetic_dataset(const GeneratorConfig& cfg,
                                            const std::filesystem::path& out_dir);

// Label rule: "yes" iff some pixel of a planted object of the class lies inside the region mask.
bool region_contains_class(const std::vector<PlantedObject>& objects, int class_index,
                           const Mask& region);

}  // namespace tvp
