#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <limits>

#include <unistd.h>

#include "tvp/region_ops.hpp"
#include "tvp/vocabulary.hpp"

namespace tvp::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("tvp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Image random_image(int h, int w, std::mt19937_64& rng) {
  Image img(h, w);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
  return img;
}

RegionSpec random_region(int h, int w, std::mt19937_64& rng, bool allow_mask) {
  std::uniform_int_distribution<int> kind(0, allow_mask ? 2 : 1);
  const int k = kind(rng);
  std::uniform_int_distribution<int> xs(0, w - 1);
  std::uniform_int_distribution<int> ys(0, h - 1);
  int x0 = xs(rng);
  int y0 = ys(rng);
  int x1 = std::uniform_int_distribution<int>(x0 + 1, w)(rng);
  int y1 = std::uniform_int_distribution<int>(y0 + 1, h)(rng);
  if (k == 0) return RegionSpec::rect(x0, y0, x1, y1);
  if (k == 1) {
    // Ellipses need a box large enough to contain at least one pixel centre.
    x1 = std::max(x1, std::min(w, x0 + 2));
    y1 = std::max(y1, std::min(h, y0 + 2));
    if (x1 - x0 < 2 || y1 - y0 < 2) return RegionSpec::rect(x0, y0, x1, y1);
    return RegionSpec::ellipse(x0, y0, x1, y1);
  }
  Mask m(h, w);
  std::bernoulli_distribution on(0.3);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.at(y, x) = on(rng) ? 1 : 0;
  }
  m.at(y0, x0) = 1;
  return RegionSpec::from_mask(std::move(m));
}

ModelConfig tiny_config(int vocab_size, int max_seq_len) {
  ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.d_vis = 8;
  cfg.encoder_blocks = 1;
  cfg.d_model = 8;
  cfg.decoder_blocks = 1;
  cfg.heads = 2;
  cfg.mlp_ratio = 4;
  cfg.vocab_size = vocab_size;
  cfg.max_seq_len = max_seq_len;
  return cfg;
}

SequenceExample random_row(const ModelConfig& cfg, std::mt19937_64& rng, int text_before, int n_slots,
                           int n_supervised) {
  std::uniform_int_distribution<int> word(Vocabulary::kNumSpecial, cfg.vocab_size - 1);
  SequenceExample row;
  for (int i = 0; i < text_before; ++i) row.tokens.push_back(word(rng));
  for (int s = 0; s < n_slots; ++s) {
    row.tokens.push_back(Vocabulary::kImgOpen);
    VisualSlot slot;
    slot.stream = s % 2 == 0 ? Stream::context : Stream::region;
    slot.start = static_cast<int>(row.tokens.size());
    slot.count = cfg.visual_tokens();
    slot.image = std::make_shared<Image>(random_image(cfg.image_size, cfg.image_size, rng));
    row.slots.push_back(slot);
    row.tokens.insert(row.tokens.end(), static_cast<std::size_t>(slot.count), Vocabulary::kPad);
    row.tokens.push_back(Vocabulary::kImgClose);
    row.tokens.push_back(word(rng));
  }
  row.loss_mask.assign(row.tokens.size(), 0);
  for (int i = 0; i < n_supervised; ++i) {
    row.tokens.push_back(i + 1 == n_supervised ? Vocabulary::kEos : word(rng));
    row.loss_mask.push_back(1);
  }
  return row;
}

double oracle_sequence_nll(const nn::Mat<double>& logits, const std::vector<int>& tokens,
                           const std::vector<std::uint8_t>& loss_mask) {
  long double total = 0;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    if (!loss_mask[t]) continue;
    const auto row = static_cast<Eigen::Index>(t - 1);
    long double m = -std::numeric_limits<long double>::infinity();
    for (Eigen::Index v = 0; v < logits.cols(); ++v) m = std::max<long double>(m, logits(row, v));
    long double z = 0;
    for (Eigen::Index v = 0; v < logits.cols(); ++v) z += std::exp(static_cast<long double>(logits(row, v)) - m);
    total += -(static_cast<long double>(logits(row, tokens[t])) - m - std::log(z));
  }
  return static_cast<double>(total);
}

ConfusionCounts oracle_counts(const std::vector<std::string>& predictions, const std::vector<std::string>& golds) {
  auto canon = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
  };
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool gold_yes = canon(golds[i]) == "yes";
    const bool correct = canon(predictions[i]) == canon(golds[i]);
    if (gold_yes && correct) ++c.tp;
    if (gold_yes && !correct) ++c.fn;
    if (!gold_yes && correct) ++c.tn;
    if (!gold_yes && !correct) ++c.fp;
  }
  return c;
}

namespace {

bool oracle_inside(const RegionSpec& r, int y, int x) {
  if (r.kind == RegionKind::mask) return r.mask().at(y, x) != 0;
  const Box& b = r.box;
  if (x < b.x0 || x >= b.x1 || y < b.y0 || y >= b.y1) return false;
  if (r.kind == RegionKind::rect) return true;
  const double cx = (b.x0 + b.x1) / 2.0;
  const double cy = (b.y0 + b.y1) / 2.0;
  const double ax = (b.x1 - b.x0) / 2.0;
  const double ay = (b.y1 - b.y0) / 2.0;
  const double dx = (x + 0.5 - cx) / ax;
  const double dy = (y + 0.5 - cy) / ay;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

std::array<std::vector<double>, 4> oracle_error_map(const std::vector<VQASample>& samples,
                                                    const std::vector<std::string>& predictions, int h, int w) {
  std::array<std::vector<double>, 4> sums;
  for (auto& g : sums) g.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ConfusionCounts one = oracle_counts({predictions[i]}, {samples[i].answer});
    const int c = one.tp ? 0 : one.fp ? 1 : one.tn ? 2 : 3;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (oracle_inside(samples[i].region, y, x)) sums[c][static_cast<std::size_t>(y) * w + x] += 1.0;
      }
    }
  }
  for (auto& g : sums) {
    const double m = *std::max_element(g.begin(), g.end());
    if (m > 0) {
      for (auto& v : g) v /= m;
    }
  }
  return sums;
}

VQASample random_sample(std::mt19937_64& rng, int image_size, bool global) {
  static const std::vector<std::string> kQuestions = {"are there discs in this region",
                                                      "are there squares in this region"};
  VQASample s;
  s.id = "s" + std::to_string(rng() % 1000000);
  s.image_path = "images/" + s.id + ".png";
  s.image = std::make_shared<Image>(random_image(image_size, image_size, rng));
  s.question = kQuestions[rng() % kQuestions.size()];
  s.answer = rng() % 2 ? "yes" : "no";
  if (global) {
    s.scope = Scope::global;
    s.region = RegionSpec::full(image_size, image_size);
    s.question = "are there discs in this image";
  } else {
    s.region = random_region(image_size, image_size, rng);
  }
  return s;
}

GeneratorConfig small_generator(int n_images, int image_size, std::uint64_t seed) {
  GeneratorConfig g;
  g.n_images = n_images;
  g.image_size = image_size;
  g.seed = seed;
  if (image_size < 64) {
    g.max_objects = 3;
    g.min_radius = 2;
    g.max_radius = std::max(3, image_size / 8);
    g.min_region = std::max(4, image_size / 6);
    g.max_region = image_size / 2;
  }
  return g;
}

}  // namespace tvp::testing
