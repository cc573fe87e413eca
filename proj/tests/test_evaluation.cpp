#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tvp/checkpoint.hpp"
#include "tvp/error.hpp"
#include "tvp/png_io.hpp"
#include "tvp/training.hpp"

using namespace tvp;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> repeat(const std::string& s, int n) { return std::vector<std::string>(static_cast<std::size_t>(n), s); }

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

VQASample with_region(RegionSpec r, const std::string& answer) {
  VQASample s;
  s.id = "x";
  s.region = std::move(r);
  s.answer = answer;
  return s;
}

Checkpoint tiny_checkpoint(const GeneratedDataset& ds) {
  ModelConfig m;
  m.image_size = 32;
  m.d_vis = 16;
  m.d_model = 16;
  m.encoder_blocks = 1;
  m.decoder_blocks = 1;
  m.heads = 2;
  TrainConfig t;
  t.max_steps = 4;
  t.lr = 1e-3;
  t.seed = 3;
  return train(ds.train(), ds.val(), m, t).checkpoint;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("normalize_answer") {
  CHECK(normalize_answer("Yes.") == "yes");
  CHECK(normalize_answer(" NO ") == "no");
  CHECK(normalize_answer("maybe") == "maybe");
  CHECK(categorize("maybe", "yes") == Category::fn);
  CHECK(categorize("maybe", "no") == Category::fp);
  CHECK(categorize("Yes!", "yes") == Category::tp);
  CHECK(categorize("no", "No") == Category::tn);
}

TEST_CASE("compute_metrics examples") {
  // tp=3, fp=1, tn=5, fn=1
  const auto golds = concat({repeat("yes", 3), repeat("no", 1), repeat("no", 5), repeat("yes", 1)});
  const auto preds = concat({repeat("yes", 3), repeat("yes", 1), repeat("no", 5), repeat("no", 1)});
  const Metrics m = compute_metrics(preds, golds);
  CHECK(m.counts == ConfusionCounts{3, 1, 5, 1});
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.f1 == doctest::Approx(0.75));

  const Metrics perfect = compute_metrics({"yes", "no", "Yes."}, {"yes", "no", "yes"});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);

  const Metrics no_positives = compute_metrics({"no", "no"}, {"no", "no"});
  CHECK(no_positives.accuracy == 1.0);
  CHECK(no_positives.f1 == 0.0);

  CHECK_THROWS_AS((void)compute_metrics({"yes"}, {"yes", "no"}), Error);
  CHECK_THROWS_AS((void)compute_metrics({}, {}), Error);
}

TEST_CASE("compute_metrics matches a brute-force counter") {
  std::mt19937_64 rng(1);
  const std::vector<std::string> pool = {"yes", "no", "Yes", "NO.", "maybe", ""};
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 200);
    std::vector<std::string> preds;
    std::vector<std::string> golds;
    for (int i = 0; i < n; ++i) {
      preds.push_back(pool[rng() % pool.size()]);
      golds.push_back(rng() % 2 ? "yes" : "no");
    }
    const Metrics m = compute_metrics(preds, golds);
    const ConfusionCounts c = tvp::testing::oracle_counts(preds, golds);
    CHECK(m.counts == c);
    CHECK(m.counts.total() == n);
    CHECK(m.accuracy == static_cast<double>(c.tp + c.tn) / n);
    const long denom = 2 * c.tp + c.fp + c.fn;
    CHECK(m.f1 == (denom == 0 ? 0.0 : 2.0 * c.tp / static_cast<double>(denom)));
  }
}

TEST_CASE("error map examples") {
  const VQASample top = with_region(RegionSpec::rect(0, 0, 8, 4), "yes");
  const VQASample full = with_region(RegionSpec::full(8, 8), "yes");

  const ErrorMap one = build_error_map({top}, {"yes"}, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(one.at(Category::tp, y, x) == (y < 4 ? 1.0 : 0.0));
  }

  const ErrorMap two = build_error_map({top, full}, {"yes", "yes"}, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(two.at(Category::tp, y, x) == (y < 4 ? 1.0 : 0.5));
  }
  CHECK(two.counts[static_cast<int>(Category::tp)] == 2);
  for (Category c : {Category::fp, Category::tn, Category::fn}) {
    for (double v : two.grid(c)) CHECK(v == 0.0);
  }
}

TEST_CASE("error map equals the brute-force oracle and ignores order") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<VQASample> samples;
    std::vector<std::string> preds;
    for (int i = 0; i < n; ++i) {
      samples.push_back(with_region(tvp::testing::random_region(12, 12, rng), rng() % 2 ? "yes" : "no"));
      preds.emplace_back(rng() % 3 == 0 ? "maybe" : (rng() % 2 ? "yes" : "no"));
    }
    const ErrorMap map = build_error_map(samples, preds, 12, 12);
    const auto oracle = tvp::testing::oracle_error_map(samples, preds, 12, 12);
    for (int c = 0; c < 4; ++c) CHECK(map.grids[static_cast<std::size_t>(c)] == oracle[static_cast<std::size_t>(c)]);

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<VQASample> s2;
    std::vector<std::string> p2;
    for (auto i : order) {
      s2.push_back(samples[i]);
      p2.push_back(preds[i]);
    }
    const ErrorMap shuffled = build_error_map(s2, p2, 12, 12);
    CHECK(shuffled.grids == map.grids);
    CHECK(shuffled.counts == map.counts);
  }
}

TEST_CASE("error map files") {
  const ErrorMap map = build_error_map({with_region(RegionSpec::rect(0, 0, 4, 2), "yes")}, {"yes"}, 4, 4);
  tvp::testing::TempDir dir("maps");
  write_error_map(map, dir.path(), "run");
  for (const char* c : {"TP", "FP", "TN", "FN"}) {
    CHECK(fs::exists(dir / (std::string("run_") + c + ".csv")));
    CHECK(fs::exists(dir / (std::string("run_") + c + ".png")));
  }
  int h = 0;
  int w = 0;
  const auto tp = read_gray_png(dir / "run_TP.png", h, w);
  CHECK(h == 4);
  CHECK(w == 4);
  CHECK(tp[0] == 255);
  CHECK(tp[15] == 0);
  const auto fn = read_gray_png(dir / "run_FN.png", h, w);
  CHECK(std::all_of(fn.begin(), fn.end(), [](auto v) { return v == 0; }));
  std::ifstream csv(dir / "run_FN.csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    CHECK(line == "0,0,0,0");
  }
  CHECK(rows == 4);
}

TEST_CASE("compare_baselines: labels, dumps, workers and compatibility") {
  GeneratorConfig g = tvp::testing::small_generator(10, 32, 7);
  const auto ds = generate_dataset(g);
  const Checkpoint ckpt = tiny_checkpoint(ds);

  const EvalReport report = compare_baselines({{"first", &ckpt}, {"second", &ckpt}}, ds.test(), 1);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].mode == "first");
  CHECK(report.rows[1].mode == "second");
  CHECK(report.rows[0].accuracy == report.rows[1].accuracy);
  CHECK(report.rows[0].f1 == report.rows[1].f1);
  CHECK(report.rows[0].n == static_cast<long>(ds.test().samples.size()));

  // Rows are reproducible from the dump.
  std::vector<std::string> preds;
  std::vector<std::string> golds;
  for (const auto& p : report.dumps[0]) {
    preds.push_back(p.prediction);
    golds.push_back(p.answer);
    CHECK(p.category == categorize(p.prediction, p.answer));
  }
  const Metrics m = compute_metrics(preds, golds);
  CHECK(m.accuracy == report.rows[0].accuracy);
  CHECK(m.f1 == report.rows[0].f1);

  const auto parallel = predict(ckpt, ds.test(), 3);
  REQUIRE(parallel.size() == report.dumps[0].size());
  for (std::size_t i = 0; i < parallel.size(); ++i) {
    CHECK(parallel[i].id == report.dumps[0][i].id);
    CHECK(parallel[i].prediction == report.dumps[0][i].prediction);
  }

  tvp::testing::TempDir dir("report");
  write_report_csv(report, dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "mode,accuracy,f1,n");
  write_dump_json(report.dumps[0], dir / "d.json");
  const auto back = read_dump_json(dir / "d.json");
  REQUIRE(back.size() == report.dumps[0].size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == report.dumps[0][i].id);
    CHECK(back[i].category == report.dumps[0][i].category);
  }
  CHECK(samples_for_dump(ds.test(), back).size() == back.size());

  DatasetManifest other = ds.test();
  other.answers = {"present", "absent"};
  try {
    (void)compare_baselines({{"x", &ckpt}}, other);
    FAIL("expected a vocabulary mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::vocabulary_mismatch);
  }
}

}  // TEST_SUITE
