#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tvp/image.hpp"
#include "tvp/region.hpp"

namespace tvp {

enum class Scope { local, global };

std::string_view to_string(Scope scope);
Scope scope_from_string(std::string_view name);

enum class ObjectShape { disc, square };

// A blob drawn by the generator; kept so labels can be recomputed from coordinates.
struct PlantedObject {
  int class_index = 0;
  int cx = 0;
  int cy = 0;
  int radius = 0;
  ObjectShape shape = ObjectShape::disc;

  bool covers(int x, int y) const;
  bool operator==(const PlantedObject&) const = default;
};

struct VQASample {
  std::string id;
  std::string image_path;  // relative to the manifest directory; doubles as the image id
  std::shared_ptr<const Image> image;
  std::string question;
  RegionSpec region;
  std::string answer;
  Scope scope = Scope::local;
  std::string mask_path;  // optional rasterized copy of the region
};

struct DatasetManifest {
  std::string name;
  std::string split;  // train | val | test
  int image_height = 0;
  int image_width = 0;
  int image_channels = 3;
  std::vector<std::string> answers;
  std::string provenance = "external";
  std::vector<VQASample> samples;
  std::vector<std::string> class_names;
  std::map<std::string, std::vector<PlantedObject>> planted;  // keyed by image_path

  std::filesystem::path base_dir;

  std::vector<std::string> image_ids() const;
};

// Writes the manifest JSON only; images and masks must already exist under base_dir.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Writes images, mask files and the manifest JSON into dir (dir/<split>.json).
void write_dataset(const DatasetManifest& manifest, const std::filesystem::path& dir);

// Validates ids, file references and answers. Images are decoded eagerly, masks on first use.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Throws split_leakage when an image id appears in more than one manifest.
void check_split_hygiene(const std::vector<DatasetManifest>& splits);

bool same_samples(const DatasetManifest& a, const DatasetManifest& b);

}  // namespace tvp
