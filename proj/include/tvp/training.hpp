#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tvp/checkpoint.hpp"
#include "tvp/dataset.hpp"
#include "tvp/evaluation.hpp"

namespace tvp {

struct TrainConfig {
  int epochs = 15;
  int batch_size = 8;
  double lr = 1e-4;
  double min_lr = 1e-6;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  std::uint64_t seed = 0;
  BaselineMode mode = BaselineMode::targeted;
  int max_steps = 0;        // 0: epochs * batches per epoch
  int val_max_samples = 0;  // 0: whole validation split
  int max_answer_tokens = 4;
  bool keep_best = true;    // return the best-validation parameters
  DecodeOptions decode;

  void validate() const;
};

// lr(t) = min_lr + 0.5 (lr - min_lr) (1 + cos(pi t / total)), clamped to t in [0, total].
double cosine_lr(long step, long total, double lr, double min_lr);

struct StepRecord {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
  long val_n = 0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  long total_steps = 0;
  int best_epoch = -1;
  double wall_clock_seconds = 0.0;

  void write_csv(const std::filesystem::path& path) const;       // step,loss,lr
  void write_summary(const std::filesystem::path& path) const;   // JSON
};

struct TrainResult {
  Checkpoint checkpoint;        // best validation epoch (or final when keep_best is off)
  Checkpoint final_checkpoint;  // parameters after the last step
  TrainLog log;
};

// Decoupled weight decay Adam; decay applies to matrices only (not gains or biases).
class AdamW {
 public:
  AdamW(Model<float>& model, const TrainConfig& cfg);
  // Clips, then applies one update at learning rate lr. Returns the pre-clip gradient norm.
  double step(Model<float>& model, double lr);

 private:
  const TrainConfig& cfg_;
  std::vector<nn::Mat<float>> m_;
  std::vector<nn::Mat<float>> v_;
  long t_ = 0;
};

// Per-channel mean over the split's distinct images (fallback 0 when empty).
Rgb dataset_channel_mean(const DatasetManifest& manifest);

// Tokenized training rows for one prompt mode.
std::vector<SequenceExample> prepare_examples(const DatasetManifest& manifest, BaselineMode mode,
                                              const PromptTemplate& tpl, const AssemblyOptions& opts,
                                              const Vocabulary& vocab, int visual_tokens);

using ProgressCallback = std::function<void(const EpochRecord&)>;

// Trains from scratch. model_cfg.vocab_size and max_seq_len are filled in from the data when
// zero. Throws non_finite when the loss diverges.
TrainResult train(const DatasetManifest& train_split, const DatasetManifest& val_split,
                  ModelConfig model_cfg, const TrainConfig& cfg, const PromptTemplate& tpl = {},
                  const ProgressCallback& progress = {});

}  // namespace tvp
