#include "tvp/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tvp/error.hpp"

namespace tvp {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_config, msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr > 0.0) || !(min_lr >= 0.0) || min_lr > lr) fail("need 0 <= min_lr <= lr and lr > 0");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (max_steps < 0 || val_max_samples < 0) fail("max_steps and val_max_samples must be >= 0");
  if (max_answer_tokens < 1) fail("max_answer_tokens must be >= 1");
  if (decode.max_new_tokens < 1) fail("decode.max_new_tokens must be >= 1");
}

double cosine_lr(long step, long total, double lr, double min_lr) {
  if (total <= 0) return lr;
  const double t = static_cast<double>(std::clamp(step, 0L, total));
  constexpr double kPi = 3.14159265358979323846;
  return min_lr + 0.5 * (lr - min_lr) * (1.0 + std::cos(kPi * t / static_cast<double>(total)));
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << "step,loss,lr\n" << std::setprecision(9);
  for (const auto& s : steps) out << s.step << ',' << s.loss << ',' << s.lr << '\n';
}

void TrainLog::write_summary(const std::filesystem::path& path) const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_accuracy", e.val_accuracy},
                           {"val_f1", e.val_f1},
                           {"val_n", e.val_n}});
  }
  nlohmann::json j{{"total_steps", total_steps},
                   {"best_epoch", best_epoch},
                   {"final_loss", steps.empty() ? 0.0 : steps.back().loss},
                   {"wall_clock_seconds", wall_clock_seconds},
                   {"epochs", epochs_json}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

AdamW::AdamW(Model<float>& model, const TrainConfig& cfg) : cfg_(cfg) {
  model.for_each_param([&](const std::string&, ParamGroup, nn::Tensor<float>& t) {
    m_.push_back(nn::Mat<float>::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(nn::Mat<float>::Zero(t.value.rows(), t.value.cols()));
  });
}

double AdamW::step(Model<float>& model, double lr) {
  double sq = 0.0;
  model.for_each_param([&](const std::string&, ParamGroup, nn::Tensor<float>& t) {
    sq += t.grad.template cast<double>().squaredNorm();
  });
  const double norm = std::sqrt(sq);
  const float clip_scale =
      cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip ? static_cast<float>(cfg_.grad_clip / (norm + 1e-6)) : 1.0f;

  ++t_;
  const auto b1 = static_cast<float>(cfg_.beta1);
  const auto b2 = static_cast<float>(cfg_.beta2);
  const auto correction1 = static_cast<float>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const auto correction2 = static_cast<float>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  const auto lr_f = static_cast<float>(lr);
  const auto eps = static_cast<float>(cfg_.adam_eps);
  const auto decay = static_cast<float>(1.0 - lr * cfg_.weight_decay);
  std::size_t i = 0;
  model.for_each_param([&](const std::string&, ParamGroup, nn::Tensor<float>& t) {
    auto& m = m_[i];
    auto& v = v_[i];
    ++i;
    if (t.value.size() == 0) return;
    const nn::Mat<float> g = t.grad * clip_scale;
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    if (t.value.rows() > 1) t.value *= decay;
    t.value.array() -= lr_f * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  });
  return norm;
}

Rgb dataset_channel_mean(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  std::array<double, 3> sum{0, 0, 0};
  double count = 0;
  for (const auto& s : manifest.samples) {
    if (!s.image || !seen.insert(s.image_path).second) continue;
    const auto& px = s.image->pixels;
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (int c = 0; c < 3; ++c) sum[c] += px[i + c];
    }
    count += static_cast<double>(px.size() / 3);
  }
  if (count == 0) return {0, 0, 0};
  Rgb out;
  for (int c = 0; c < 3; ++c) out[c] = static_cast<std::uint8_t>(std::lround(sum[c] / count));
  return out;
}

std::vector<SequenceExample> prepare_examples(const DatasetManifest& manifest, BaselineMode mode,
                                              const PromptTemplate& tpl, const AssemblyOptions& opts,
                                              const Vocabulary& vocab, int visual_tokens) {
  std::vector<SequenceExample> out;
  out.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    auto prompt = assemble_prompt(s, mode, tpl, opts);
    out.push_back(make_example(tokenize(prompt, vocab, visual_tokens, split_words(s.answer))));
  }
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

TrainResult train(const DatasetManifest& train_split, const DatasetManifest& val_split,
                  ModelConfig model_cfg, const TrainConfig& cfg, const PromptTemplate& tpl,
                  const ProgressCallback& progress) {
  cfg.validate();
  tpl.validate();
  if (train_split.samples.empty()) throw Error(ErrorCode::invalid_config, "training split is empty");
  const auto started = std::chrono::steady_clock::now();

  Checkpoint ckpt;
  ckpt.vocab = build_vocabulary({&train_split}, tpl.texts());
  ckpt.mode = cfg.mode;
  ckpt.prompt_template = tpl;
  ckpt.assembly.blank_fill = dataset_channel_mean(train_split);
  ckpt.decode = cfg.decode;
  ckpt.seed = cfg.seed;

  if (model_cfg.image_size != train_split.image_height || train_split.image_height != train_split.image_width) {
    throw Error(ErrorCode::dimension_mismatch, "model image_size must match the square dataset images");
  }
  if (model_cfg.vocab_size == 0) model_cfg.vocab_size = ckpt.vocab.size();
  if (model_cfg.vocab_size != ckpt.vocab.size()) {
    throw Error(ErrorCode::vocabulary_mismatch, "vocab_size differs from the training vocabulary");
  }

  const int visual_tokens = model_cfg.visual_tokens();
  auto examples = prepare_examples(train_split, cfg.mode, tpl, ckpt.assembly, ckpt.vocab, visual_tokens);
  if (model_cfg.max_seq_len == 0) {
    std::size_t longest = 0;
    for (const auto& e : examples) longest = std::max(longest, e.tokens.size());
    for (const auto& s : val_split.samples) {
      auto p = assemble_prompt(s, cfg.mode, tpl, ckpt.assembly);
      longest = std::max(longest, tokenize(p, ckpt.vocab, visual_tokens).tokens.size() + split_words(s.answer).size() + 1);
    }
    model_cfg.max_seq_len = static_cast<int>(longest) + std::max(cfg.max_answer_tokens, cfg.decode.max_new_tokens);
  }
  ckpt.model = Model<float>(model_cfg, cfg.seed);

  const int n = static_cast<int>(examples.size());
  const long per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total = cfg.max_steps > 0 ? cfg.max_steps : per_epoch * cfg.epochs;
  const int n_epochs = static_cast<int>((total + per_epoch - 1) / per_epoch);

  std::mt19937_64 shuffle_rng(mix(cfg.seed, 1));
  std::mt19937_64 dropout_rng(mix(cfg.seed, 2));
  AdamW opt(ckpt.model, cfg);
  TrainLog log;
  log.total_steps = total;

  DatasetManifest val_subset = val_split;
  if (cfg.val_max_samples > 0 && val_subset.samples.size() > static_cast<std::size_t>(cfg.val_max_samples)) {
    val_subset.samples.resize(static_cast<std::size_t>(cfg.val_max_samples));
  }

  Model<float> best = ckpt.model;
  double best_acc = -1.0;
  std::vector<int> order(static_cast<std::size_t>(n));
  long step = 0;
  for (int epoch = 0; epoch < n_epochs && step < total; ++epoch) {
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const auto j = static_cast<int>(shuffle_rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_loss = 0.0;
    long epoch_steps = 0;
    for (int start = 0; start < n && step < total; start += cfg.batch_size) {
      SequenceBatch batch;
      for (int k = start; k < std::min(n, start + cfg.batch_size); ++k) {
        batch.rows.push_back(examples[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
      }
      const double lr = cosine_lr(step, total, cfg.lr, cfg.min_lr);
      ckpt.model.zero_grad();
      const double loss = ckpt.model.forward_backward(batch, model_cfg.dropout > 0 ? &dropout_rng : nullptr);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged at step " << step << " (epoch " << epoch << "): loss = " << loss;
        throw Error(ErrorCode::non_finite, msg.str());
      }
      opt.step(ckpt.model, lr);
      log.steps.push_back({step, loss, lr});
      epoch_loss += loss;
      ++epoch_steps;
      ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    if (!val_subset.samples.empty()) {
      const auto dump = predict(ckpt, val_subset);
      const ReportRow row = summarize(std::string(to_string(cfg.mode)), dump);
      rec.val_accuracy = row.accuracy;
      rec.val_f1 = row.f1;
      rec.val_n = row.n;
      if (rec.val_accuracy > best_acc) {
        best_acc = rec.val_accuracy;
        best = ckpt.model;
        log.best_epoch = epoch;
      }
    }
    log.epochs.push_back(rec);
    if (progress) progress(rec);
  }

  ckpt.step = step;
  TrainResult result;
  result.final_checkpoint = ckpt;
  result.checkpoint = ckpt;
  if (cfg.keep_best && log.best_epoch >= 0) {
    result.checkpoint.model = best;
  } else {
    log.best_epoch = n_epochs - 1;
  }
  log.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.log = std::move(log);
  return result;
}

}  // namespace tvp
