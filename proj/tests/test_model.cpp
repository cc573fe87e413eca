#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tvp/error.hpp"
#include "tvp/gradient_check.hpp"
#include "tvp/vocabulary.hpp"

using namespace tvp;
using MatD = nn::Mat<double>;

namespace {

nn::Tensor<double>& param(Model<double>& m, const std::string& name) {
  nn::Tensor<double>* found = nullptr;
  m.for_each_param([&](const std::string& n, ParamGroup, nn::Tensor<double>& t) {
    if (n == name) found = &t;
  });
  REQUIRE(found != nullptr);
  return *found;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("encode_image shape and determinism") {
  ModelConfig cfg;
  cfg.vocab_size = 20;
  const Model<float> m(cfg, 1);
  std::mt19937_64 rng(2);
  const Image img = tvp::testing::random_image(64, 64, rng);
  const auto a = m.encode_image(img);
  CHECK(a.rows() == 64);
  CHECK(a.cols() == cfg.d_vis);
  CHECK((m.encode_image(img).array() == a.array()).all());
  CHECK_THROWS_AS((void)m.encode_image(tvp::testing::random_image(32, 32, rng)), Error);
}

TEST_CASE("swapping two patches swaps their embeddings before positions") {
  ModelConfig cfg = tvp::testing::tiny_config(16);
  cfg.encoder_blocks = 0;
  Model<double> m(cfg, 3);
  param(m, "encoder.pos").value.setZero();
  std::mt19937_64 rng(4);
  const Image img = tvp::testing::random_image(16, 16, rng);
  Image swapped = img;
  // Patch 0 is the top-left 8x8 block, patch 3 the bottom-right one.
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      swapped.set_pixel(y, x, img.pixel(y + 8, x + 8));
      swapped.set_pixel(y + 8, x + 8, img.pixel(y, x));
    }
  }
  const MatD a = m.encode_image(img);
  const MatD b = m.encode_image(swapped);
  CHECK((a.row(0).array() == b.row(3).array()).all());
  CHECK((a.row(3).array() == b.row(0).array()).all());
  CHECK((a.row(1).array() == b.row(1).array()).all());
}

TEST_CASE("projections: identity, distinct streams, linearity") {
  ModelConfig cfg = tvp::testing::tiny_config(16);
  Model<double> m(cfg, 5);
  std::mt19937_64 rng(6);
  const MatD tokens = m.encode_image(tvp::testing::random_image(16, 16, rng));
  CHECK(!(m.project_visual(tokens, Stream::context).array() == m.project_visual(tokens, Stream::region).array()).all());
  CHECK((m.project_visual(2.5 * tokens, Stream::region) - 2.5 * m.project_visual(tokens, Stream::region))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  param(m, "projection.context").value = MatD::Identity(cfg.d_vis, cfg.d_model);
  CHECK((m.project_visual(tokens, Stream::context).array() == tokens.array()).all());
}

TEST_CASE("forward shapes and sequence limit") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  const Model<double> m(cfg, 7);
  std::mt19937_64 rng(8);
  SequenceBatch batch;
  batch.rows.push_back(tvp::testing::random_row(cfg, rng, 3, 2, 2));
  batch.rows.push_back(tvp::testing::random_row(cfg, rng, 5, 1, 3));
  const auto logits = m.forward(batch);
  REQUIRE(logits.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(logits[i].rows() == static_cast<Eigen::Index>(batch.rows[i].tokens.size()));
    CHECK(logits[i].cols() == 16);
  }
  SequenceExample too_long = tvp::testing::random_row(cfg, rng, 36, 1, 2);
  CHECK_THROWS_AS((void)m.forward(too_long), Error);
}

TEST_CASE("causality: future tokens never reach past logits") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  const Model<double> m(cfg, 9);
  std::mt19937_64 rng(10);
  const SequenceExample row = tvp::testing::random_row(cfg, rng, 4, 2, 3);
  const MatD base = m.forward(row);
  const auto n = static_cast<int>(row.tokens.size());
  for (int t = 0; t < n; ++t) {
    SequenceExample edited = row;
    edited.tokens[static_cast<std::size_t>(t)] = (row.tokens[static_cast<std::size_t>(t)] + 7) % 16;
    const MatD out = m.forward(edited);
    for (int p = 0; p < t; ++p) CHECK((out.row(p).array() == base.row(p).array()).all());
  }
}

TEST_CASE("slot locality and two-stream independence") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  const Model<double> m(cfg, 11);
  std::mt19937_64 rng(12);
  const SequenceExample row = tvp::testing::random_row(cfg, rng, 3, 2, 2);
  const MatD base = m.forward(row);
  const auto before = m.embed_visuals(row.slots);
  for (std::size_t s = 0; s < row.slots.size(); ++s) {
    SequenceExample edited = row;
    edited.slots[s].image = std::make_shared<Image>(cfg.image_size, cfg.image_size);
    const MatD out = m.forward(edited);
    for (int p = 0; p < row.slots[s].start; ++p) CHECK((out.row(p).array() == base.row(p).array()).all());
    CHECK((out.row(row.slots[s].start).array() != base.row(row.slots[s].start).array()).any());
    const auto after = m.embed_visuals(edited.slots);
    for (std::size_t o = 0; o < row.slots.size(); ++o) {
      const bool same = (after[o].array() == before[o].array()).all();
      CHECK(same == (o != s));
    }
  }
}

TEST_CASE("gradients reach each projection only through its own stream") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  Model<double> m(cfg, 13);
  std::mt19937_64 rng(14);
  SequenceBatch context_only{{tvp::testing::random_row(cfg, rng, 2, 1, 2)}};
  m.zero_grad();
  m.forward_backward(context_only);
  CHECK(param(m, "projection.context").grad.norm() > 0);
  CHECK(param(m, "projection.region").grad.norm() == 0);

  SequenceBatch both{{tvp::testing::random_row(cfg, rng, 2, 2, 2)}};
  m.zero_grad();
  m.forward_backward(both);
  CHECK(param(m, "projection.context").grad.norm() > 0);
  CHECK(param(m, "projection.region").grad.norm() > 0);
}

TEST_CASE("loss: oracle, uniform logits, margin limit and empty mask") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 10);
    const int v = 4 + static_cast<int>(rng() % 12);
    MatD logits(n, v);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = normal(rng);
    std::vector<int> tokens(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
    for (auto& t : tokens) t = static_cast<int>(rng() % static_cast<unsigned>(v));
    for (int i = 1; i < n; ++i) mask[static_cast<std::size_t>(i)] = rng() % 2;
    mask.back() = 1;
    CHECK(sequence_nll<double>(logits, tokens, mask) ==
          doctest::Approx(tvp::testing::oracle_sequence_nll(logits, tokens, mask)).epsilon(1e-12));
  }

  MatD uniform = MatD::Constant(6, 16, 0.37);
  const std::vector<int> tokens = {1, 5, 6, 7, 9, 2};
  const std::vector<std::uint8_t> mask = {0, 0, 0, 1, 1, 1};
  CHECK(std::abs(sequence_nll<double>(uniform, tokens, mask) - 3.0 * std::log(16.0)) < 1e-9);

  MatD sharp = MatD::Zero(6, 16);
  for (int t = 1; t < 6; ++t) sharp(t - 1, tokens[static_cast<std::size_t>(t)]) = 80.0;
  CHECK(sequence_nll<double>(sharp, tokens, mask) < 1e-30);

  const std::vector<std::uint8_t> none(6, 0);
  CHECK_THROWS_AS((void)sequence_nll<double>(uniform, tokens, none), Error);
}

TEST_CASE("batch loss is the mean of per-row losses and masked positions carry no gradient") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  Model<double> m(cfg, 16);
  std::mt19937_64 rng(17);
  SequenceBatch batch;
  for (int i = 0; i < 4; ++i) batch.rows.push_back(tvp::testing::random_row(cfg, rng, 1 + i, 1 + i % 2, 1 + i % 3));
  const auto logits = m.forward(batch);
  double mean = 0;
  for (std::size_t i = 0; i < batch.rows.size(); ++i) {
    mean += sequence_nll<double>(logits[i], batch.rows[i].tokens, batch.rows[i].loss_mask);
  }
  mean /= 4;
  CHECK(compute_loss<double>(logits, batch) == doctest::Approx(mean).epsilon(1e-12));
  m.zero_grad();
  CHECK(m.forward_backward(batch) == doctest::Approx(mean).epsilon(1e-12));

  MatD dlogits;
  const auto& row = batch.rows[0];
  sequence_nll<double>(logits[0], row.tokens, row.loss_mask, &dlogits);
  for (std::size_t t = 1; t < row.tokens.size(); ++t) {
    if (!row.loss_mask[t]) CHECK(dlogits.row(static_cast<Eigen::Index>(t - 1)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gradient check on a tiny model") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  Model<double> m(cfg, 18);
  tvp::testing::perturb_parameters(m, 118);
  std::mt19937_64 rng(19);
  SequenceBatch batch;
  batch.rows.push_back(tvp::testing::random_row(cfg, rng, 3, 2, 2));
  batch.rows.push_back(tvp::testing::random_row(cfg, rng, 2, 2, 3));
  const auto r = gradient_check(m, batch, 1e-5, 200, 1);
  CHECK(r.coordinates >= 200);
  CHECK(r.max_relative_error <= 1e-4);
  for (const char* g : {"encoder", "projection_context", "projection_region", "embeddings", "decoder"}) {
    CAPTURE(g);
    CHECK(r.coordinates_by_group.count(g) == 1);
  }

  const auto coarse = gradient_check(m, batch, 1e-3, 200, 2);
  const auto fine = gradient_check(m, batch, 5e-4, 200, 2);
  CHECK(fine.max_relative_error <= 4.0 * coarse.max_relative_error + 1e-12);
}

TEST_CASE("float and double models agree after cast") {
  const ModelConfig cfg = tvp::testing::tiny_config(16, 40);
  const Model<float> f(cfg, 20);
  const Model<double> d = f.cast<double>();
  std::mt19937_64 rng(21);
  const SequenceExample row = tvp::testing::random_row(cfg, rng, 3, 2, 2);
  CHECK((f.forward(row).cast<double>() - d.forward(row)).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(f.parameter_count() == d.parameter_count());
}

}  // TEST_SUITE
