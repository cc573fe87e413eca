#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using tvp::testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const TempDir& dir, const std::string& args) {
  const fs::path log = dir / "cli_output.txt";
  const std::string cmd = std::string(TVP_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

fs::path small_config(const TempDir& dir) {
  const nlohmann::json j = {
      {"seed", 5},
      {"generator",
       {{"name", "tiny"}, {"image_size", 32}, {"n_images", 12}, {"max_objects", 3}, {"max_radius", 4},
        {"min_region", 6}, {"max_region", 16}}},
      {"model",
       {{"d_vis", 16}, {"d_model", 16}, {"encoder_blocks", 1}, {"decoder_blocks", 1}, {"heads", 2}}},
      {"train", {{"max_steps", 2}, {"lr", 1e-3}}}};
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data writes three splits, prints matching counts and is reproducible") {
  TempDir dir("cli_gen");
  const fs::path cfg = small_config(dir);
  const Run r = run(dir, "gen-data --config " + cfg.string() + " --out " + (dir / "a").string());
  REQUIRE(r.code == 0);
  for (const char* split : {"train", "val", "test"}) {
    const fs::path m = dir / "a" / (std::string(split) + ".json");
    REQUIRE(fs::exists(m));
    const auto j = nlohmann::json::parse(slurp(m));
    std::set<std::string> images;
    for (const auto& s : j["samples"]) images.insert(s["image_path"].get<std::string>());
    // Summary line: name, split, #images, #QA-pairs.
    std::istringstream lines(r.out);
    std::string line;
    bool found = false;
    while (std::getline(lines, line)) {
      std::istringstream fields(line);
      std::string name, sp;
      std::size_t n_img = 0, n_qa = 0;
      if (fields >> name >> sp >> n_img >> n_qa && sp == split) {
        found = true;
        CHECK(name == "tiny");
        CHECK(n_img == images.size());
        CHECK(n_qa == j["samples"].size());
      }
    }
    CHECK(found);
  }
  REQUIRE(run(dir, "gen-data --config " + cfg.string() + " --out " + (dir / "b").string()).code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir / "a");
    CAPTURE(rel.string());
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
  }
}

TEST_CASE("config and flag errors exit with code 2") {
  TempDir dir("cli_cfg");
  CHECK(run(dir, "gen-data --out " + (dir / "x").string() + " --cue-strength 3").code == 2);
  CHECK(run(dir, "gen-data --out " + (dir / "x").string() + " --bogus 1").code == 2);
  CHECK(run(dir, "").code == 2);
  std::ofstream(dir / "bad.json") << R"({"generator": {"n_imagez": 3}})";
  const Run r = run(dir, "gen-data --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("n_imagez") != std::string::npos);
  CHECK(run(dir, "train --data " + (dir / "x").string() + " --out y --mode sideways").code == 2);
}

TEST_CASE("help lists every flag of every subcommand") {
  TempDir dir("cli_help");
  const std::map<std::string, std::vector<std::string>> flags = {
      {"gen-data", {"--config", "--seed", "--out", "--preset", "--images", "--image-size", "--cue-strength"}},
      {"train", {"--config", "--seed", "--data", "--train", "--val", "--out", "--mode", "--epochs", "--lr"}},
      {"eval", {"--checkpoint", "--manifest", "--out", "--workers"}},
      {"compare", {"--checkpoint", "--manifest", "--out", "--workers"}},
      {"error-maps", {"--dump", "--manifest", "--out", "--prefix"}}};
  for (const auto& [cmd, names] : flags) {
    const Run r = run(dir, cmd + " --help");
    CHECK(r.code == 0);
    for (const auto& f : names) {
      CAPTURE(cmd);
      CAPTURE(f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("missing manifest is a data error naming the path") {
  TempDir dir("cli_missing");
  const Run r = run(dir, "train --data " + (dir / "nowhere").string() + " --out " + (dir / "o").string());
  CHECK(r.code == 3);
  CHECK(r.out.find((dir / "nowhere").string()) != std::string::npos);
}

TEST_CASE("train accepts every mode; eval, compare and error-maps write their reports") {
  TempDir dir("cli_pipeline");
  const fs::path cfg = small_config(dir);
  const std::string data = (dir / "data").string();
  REQUIRE(run(dir, "gen-data --config " + cfg.string() + " --out " + data).code == 0);
  for (const char* mode : {"no_mask", "region_in_text", "crop_region", "draw_region", "context_only", "targeted"}) {
    CAPTURE(mode);
    const std::string out = (dir / mode).string();
    const Run r = run(dir, "train --config " + cfg.string() + " --data " + data + " --mode " + mode + " --out " + out);
    CHECK(r.code == 0);
    CHECK(r.out.find("accuracy") != std::string::npos);
    CHECK(fs::exists(fs::path(out) / "checkpoint.tvp"));
    CHECK(fs::exists(fs::path(out) / "train_log.csv"));
    CHECK(fs::exists(fs::path(out) / "train_summary.json"));
  }

  const std::string test = data + "/test.json";
  const std::string ckpt = (dir / "targeted" / "checkpoint.tvp").string();
  REQUIRE(run(dir, "eval --checkpoint " + ckpt + " --manifest " + test + " --out " + (dir / "eval").string()).code == 0);
  const std::string csv = slurp(dir / "eval" / "metrics_targeted_tiny_test.csv");
  CHECK(csv.rfind("mode,accuracy,f1,n\ntargeted,", 0) == 0);
  CHECK(fs::exists(dir / "eval" / "dump_targeted_tiny_test.json"));

  REQUIRE(run(dir, "compare --checkpoint " + ckpt + " --manifest " + test + " --out " + (dir / "cmp").string()).code == 0);
  const std::string table = slurp(dir / "cmp" / "comparison_tiny_test.csv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 2);

  REQUIRE(run(dir, "compare --checkpoint a=" + ckpt + " --checkpoint b=" + (dir / "no_mask" / "checkpoint.tvp").string() +
                       " --manifest " + test + " --out " + (dir / "cmp2").string() + " --workers 2")
              .code == 0);
  const std::string two_rows = slurp(dir / "cmp2" / "comparison_tiny_test.csv");
  CHECK(std::count(two_rows.begin(), two_rows.end(), '\n') == 3);

  // A dump whose predictions are all correct has no false negatives.
  auto dump = nlohmann::json::parse(slurp(dir / "eval" / "dump_targeted_tiny_test.json"));
  for (auto& d : dump) {
    d["prediction"] = d["answer"];
    d["category"] = d["answer"] == "yes" ? "TP" : "TN";
  }
  std::ofstream(dir / "perfect.json") << dump.dump();
  const std::string maps = (dir / "maps").string();
  REQUIRE(run(dir, "error-maps --dump " + (dir / "perfect.json").string() + " --manifest " + test + " --out " + maps).code == 0);
  for (const char* c : {"TP", "FP", "TN", "FN"}) CHECK(fs::exists(fs::path(maps) / (std::string("perfect_") + c + ".csv")));
  const std::string fn = slurp(fs::path(maps) / "perfect_FN.csv");
  CHECK(fn.find_first_not_of("0,\n") == std::string::npos);

  std::ofstream(dir / "alien.json") << R"({"name":"alien","split":"test","image_size":[32,32,3],"answers":["present","absent"],"samples":[]})";
  const Run mismatch = run(dir, "eval --checkpoint " + ckpt + " --manifest " + (dir / "alien.json").string() + " --out " + (dir / "e2").string());
  CHECK(mismatch.code != 0);
}

TEST_CASE("overfit preset: val-on-train and eval accuracy reach 0.99") {
  TempDir dir("cli_overfit");
  const std::string cfg = (fs::path(TVP_SOURCE_DIR) / "configs" / "overfit.json").string();
  const std::string data = (dir / "data").string();
  REQUIRE(run(dir, "gen-data --config " + cfg + " --out " + data).code == 0);
  const std::string train = data + "/train.json";
  const Run t = run(dir, "train --config " + cfg + " --train " + train + " --val " + train + " --out " + (dir / "run").string());
  REQUIRE(t.code == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "run" / "train_summary.json"));
  const int best = summary["best_epoch"].get<int>();
  CHECK(summary["epochs"][static_cast<std::size_t>(best)]["val_accuracy"].get<double>() >= 0.99);

  REQUIRE(run(dir, "eval --checkpoint " + (dir / "run" / "checkpoint.tvp").string() + " --manifest " + train + " --out " +
                       (dir / "eval").string())
              .code == 0);
  std::istringstream csv(slurp(dir / "eval" / "metrics_targeted_overfit_train.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(header == "mode,accuracy,f1,n");
  CHECK(std::stod(row.substr(row.find(',') + 1)) >= 0.99);
}

}  // TEST_SUITE
