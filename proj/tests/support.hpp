#pragma once

// Shared fixtures and independent oracles for the unit and acceptance suites.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tvp/dataset.hpp"
#include "tvp/evaluation.hpp"
#include "tvp/generator.hpp"
#include "tvp/model.hpp"
#include "tvp/prompt.hpp"

namespace tvp::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Image random_image(int h, int w, std::mt19937_64& rng);
RegionSpec random_region(int h, int w, std::mt19937_64& rng, bool allow_mask = true);

// d=8, one encoder and one decoder block, 16x16 images with 8x8 patches (4 visual tokens).
ModelConfig tiny_config(int vocab_size, int max_seq_len = 64);

// Adds N(0, stddev^2) noise to every parameter, moving the model off the near-symmetric
// initialization where many gradients are too small for finite differences to resolve.
template <typename T>
void perturb_parameters(Model<T>& model, std::uint64_t seed, double stddev = 0.3) {
  nn::Gaussian g(seed);
  model.for_each_param([&](const std::string&, ParamGroup, nn::Tensor<T>& t) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += static_cast<T>(stddev * g());
  });
}

// Random row: text tokens in [first_word, vocab), `n_slots` visual slots (streams alternate,
// starting with context) each wrapped in <img> </img>, and `n_supervised` loss positions at the end.
SequenceExample random_row(const ModelConfig& cfg, std::mt19937_64& rng, int text_before, int n_slots,
                           int n_supervised);

// Direct per-position log-softmax cross entropy in long double.
double oracle_sequence_nll(const nn::Mat<double>& logits, const std::vector<int>& tokens,
                           const std::vector<std::uint8_t>& loss_mask);

// Pairwise confusion counter that shares no code with compute_metrics.
ConfusionCounts oracle_counts(const std::vector<std::string>& predictions, const std::vector<std::string>& golds);

// Per-pixel accumulation, then division by the maximum, written without rasterize_region.
std::array<std::vector<double>, 4> oracle_error_map(const std::vector<VQASample>& samples,
                                                    const std::vector<std::string>& predictions, int h, int w);

// Local and global samples with random regions over a shared random image.
VQASample random_sample(std::mt19937_64& rng, int image_size, bool global);

// Small in-memory dataset for training tests.
GeneratorConfig small_generator(int n_images, int image_size, std::uint64_t seed);

}  // namespace tvp::testing
