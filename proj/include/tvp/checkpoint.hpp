#pragma once

#include <cstdint>
#include <filesystem>

#include "tvp/decoding.hpp"
#include "tvp/model.hpp"
#include "tvp/prompt.hpp"
#include "tvp/vocabulary.hpp"

namespace tvp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  Vocabulary vocab;
  BaselineMode mode = BaselineMode::targeted;
  PromptTemplate prompt_template;
  AssemblyOptions assembly;
  DecodeOptions decode;
  std::uint64_t seed = 0;
  long step = 0;
};

// Binary container: magic, version, JSON header (config, vocabulary, prompt settings, tensor
// table), raw float32 tensors and an FNV-1a checksum. Written to a temp file and renamed.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws corrupt_checkpoint (bad magic, truncation, checksum) or checkpoint_version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameters into `target`; throws checkpoint_version when any tensor shape differs.
void restore_parameters(const Model<float>& source, Model<float>& target);

bool parameters_equal(const Model<float>& a, const Model<float>& b);

}  // namespace tvp
