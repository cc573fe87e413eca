// tvp: data generation, training, evaluation, baseline comparison and error maps.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error or divergence.
// TVP_VERBOSITY: 0 quiet, 1 normal (default), 2 per-epoch progress.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "tvp/checkpoint.hpp"
#include "tvp/config.hpp"
#include "tvp/error.hpp"
#include "tvp/evaluation.hpp"
#include "tvp/generator.hpp"
#include "tvp/training.hpp"

namespace fs = std::filesystem;
using namespace tvp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int verbosity() {
  const char* v = std::getenv("TVP_VERBOSITY");
  if (v == nullptr || *v == '\0') return 1;
  return std::atoi(v);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config:
    case ErrorCode::checkpoint_version:
    case ErrorCode::vocabulary_mismatch:
      return kExitConfig;
    case ErrorCode::non_finite:
    case ErrorCode::sequence_too_long:
    case ErrorCode::empty_loss_mask:
      return kExitRuntime;
    default:
      return kExitData;
  }
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

RunConfig base_config(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) {
    rc.seed = *c.seed;
    rc.generator.seed = *c.seed;
    rc.train.seed = *c.seed;
  }
  return rc;
}

template <typename T>
void override_if(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

std::string file_stem_for(const std::string& mode, const std::string& dataset) {
  return mode + "_" + dataset;
}

void print_metrics(const std::string& label, const ReportRow& row) {
  std::cout << std::fixed << std::setprecision(4) << label << ": accuracy " << row.accuracy << "  f1 "
            << row.f1 << "  n " << row.n << "\n";
}

// ---- gen-data ----------------------------------------------------------------------------

struct GenArgs {
  Common common;
  std::string out;
  std::optional<std::string> preset;
  std::optional<std::string> name;
  std::optional<int> images;
  std::optional<int> image_size;
  std::optional<int> questions_per_image;
  std::optional<double> cue_strength;
  std::optional<double> size_correlation;
  std::optional<double> location_cluster;
  std::optional<double> global_fraction;
};

int cmd_gen_data(const GenArgs& a) {
  RunConfig rc = base_config(a.common);
  GeneratorConfig& g = rc.generator;
  if (a.preset) {
    if (*a.preset == "biased") {
      const auto seed = g.seed;
      g = GeneratorConfig::biased();
      g.seed = seed;
    } else if (*a.preset != "default") {
      throw Error(ErrorCode::invalid_config, "unknown preset '" + *a.preset + "' (default, biased)");
    }
  }
  override_if(a.name, g.name);
  override_if(a.images, g.n_images);
  override_if(a.image_size, g.image_size);
  override_if(a.questions_per_image, g.questions_per_image);
  override_if(a.cue_strength, g.context_cue_strength);
  override_if(a.size_correlation, g.region_size_answer_correlation);
  override_if(a.location_cluster, g.location_cluster_strength);
  override_if(a.global_fraction, g.global_question_fraction);
  g.validate();

  const GeneratedDataset ds = generate_synthetic_dataset(g, a.out);
  if (verbosity() >= 1) {
    std::cout << std::left << std::setw(24) << "name" << std::setw(8) << "split" << std::right << std::setw(10)
              << "#images" << std::setw(12) << "#QA-pairs" << "\n";
    for (const auto& m : ds.splits) {
      std::cout << std::left << std::setw(24) << m.name << std::setw(8) << m.split << std::right << std::setw(10)
                << m.image_ids().size() << std::setw(12) << m.samples.size() << "\n";
    }
  }
  return kExitOk;
}

// ---- train -------------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string train_manifest;
  std::string val_manifest;
  std::string out;
  std::optional<std::string> mode;
  std::optional<int> epochs;
  std::optional<int> max_steps;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<int> val_max_samples;
};

int cmd_train(const TrainArgs& a) {
  RunConfig rc = base_config(a.common);
  if (a.mode) rc.train.mode = mode_from_string(*a.mode);
  override_if(a.epochs, rc.train.epochs);
  override_if(a.max_steps, rc.train.max_steps);
  override_if(a.batch_size, rc.train.batch_size);
  override_if(a.lr, rc.train.lr);
  override_if(a.val_max_samples, rc.train.val_max_samples);
  rc.train.validate();

  const fs::path train_path = !a.train_manifest.empty() ? fs::path(a.train_manifest) : fs::path(a.data) / "train.json";
  const fs::path val_path = !a.val_manifest.empty() ? fs::path(a.val_manifest) : fs::path(a.data) / "val.json";
  const DatasetManifest train_split = load_manifest(train_path);
  const DatasetManifest val_split = load_manifest(val_path);
  check_split_hygiene({train_split, val_split});
  rc.model.image_size = train_split.image_height;

  ProgressCallback progress;
  if (verbosity() >= 2) {
    progress = [](const EpochRecord& e) {
      std::cerr << std::fixed << std::setprecision(4) << "epoch " << e.epoch << "  loss " << e.train_loss
                << "  val accuracy " << e.val_accuracy << "  val f1 " << e.val_f1 << "\n";
    };
  }
  const TrainResult result = train(train_split, val_split, rc.model, rc.train, rc.prompt, progress);

  fs::create_directories(a.out);
  save_checkpoint(result.checkpoint, fs::path(a.out) / "checkpoint.tvp");
  result.log.write_csv(fs::path(a.out) / "train_log.csv");
  result.log.write_summary(fs::path(a.out) / "train_summary.json");

  if (verbosity() >= 1) {
    const auto& best = result.log.epochs.at(static_cast<std::size_t>(std::max(result.log.best_epoch, 0)));
    ReportRow row{std::string(to_string(rc.train.mode)), best.val_accuracy, best.val_f1, best.val_n};
    print_metrics("val (" + row.mode + ", epoch " + std::to_string(best.epoch) + ")", row);
  }
  return kExitOk;
}

// ---- eval / compare ----------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  int workers = 1;
};

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const DatasetManifest manifest = load_manifest(a.manifest);
  const std::string mode(to_string(ckpt.mode));
  const EvalReport report = compare_baselines({{mode, &ckpt}}, manifest, a.workers);
  const std::string stem = file_stem_for(mode, manifest.name + "_" + manifest.split);
  fs::create_directories(a.out);
  write_report_csv(report, fs::path(a.out) / ("metrics_" + stem + ".csv"));
  write_dump_json(report.dumps.front(), fs::path(a.out) / ("dump_" + stem + ".json"));
  if (verbosity() >= 1) print_metrics(mode, report.rows.front());
  return kExitOk;
}

struct CompareArgs {
  std::vector<std::string> checkpoints;
  std::string manifest;
  std::string out;
  int workers = 1;
};

int cmd_compare(const CompareArgs& a) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  std::vector<std::pair<std::string, Checkpoint>> loaded;
  for (const auto& spec : a.checkpoints) {
    const auto eq = spec.find('=');
    std::string label;
    fs::path path;
    if (eq == std::string::npos) {
      path = spec;
    } else {
      label = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    Checkpoint ckpt = load_checkpoint(path);
    if (label.empty()) label = std::string(to_string(ckpt.mode));
    loaded.emplace_back(label, std::move(ckpt));
  }
  std::vector<std::pair<std::string, const Checkpoint*>> refs;
  for (const auto& [label, ckpt] : loaded) refs.emplace_back(label, &ckpt);
  const EvalReport report = compare_baselines(refs, manifest, a.workers);

  const std::string dataset = manifest.name + "_" + manifest.split;
  fs::create_directories(a.out);
  write_report_csv(report, fs::path(a.out) / ("comparison_" + dataset + ".csv"));
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    write_dump_json(report.dumps[i], fs::path(a.out) / ("dump_" + file_stem_for(report.rows[i].mode, dataset) + ".json"));
  }
  if (verbosity() >= 1) {
    for (const auto& row : report.rows) print_metrics(row.mode, row);
  }
  return kExitOk;
}

// ---- error-maps --------------------------------------------------------------------------

struct ErrorMapArgs {
  std::string dump;
  std::string manifest;
  std::string out;
  std::string prefix;
};

int cmd_error_maps(const ErrorMapArgs& a) {
  const DatasetManifest manifest = load_manifest(a.manifest);
  const auto dump = read_dump_json(a.dump);
  const auto samples = samples_for_dump(manifest, dump);
  std::vector<std::string> predictions;
  predictions.reserve(dump.size());
  for (const auto& p : dump) predictions.push_back(p.prediction);
  const ErrorMap map = build_error_map(samples, predictions, manifest.image_height, manifest.image_width);
  const std::string prefix = a.prefix.empty() ? fs::path(a.dump).stem().string() : a.prefix;
  write_error_map(map, a.out, prefix);
  if (verbosity() >= 1) {
    for (Category c : kCategories) {
      std::cout << to_string(c) << ": " << map.counts[static_cast<int>(c)] << " samples\n";
    }
  }
  return kExitOk;
}

std::vector<std::string> mode_names() {
  std::vector<std::string> names;
  for (BaselineMode m : kAllModes) names.emplace_back(to_string(m));
  return names;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run config JSON {seed, generator, model, train, prompt}")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Seed for every component (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted visual prompting for localized VQA"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic region-QA dataset");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--preset", gen.preset, "Generator preset: default or biased");
  gen_cmd->add_option("--name", gen.name, "Dataset name");
  gen_cmd->add_option("--images", gen.images, "Number of images");
  gen_cmd->add_option("--image-size", gen.image_size, "Image side length in pixels");
  gen_cmd->add_option("--questions-per-image", gen.questions_per_image, "Questions per image");
  gen_cmd->add_option("--cue-strength", gen.cue_strength, "context_cue_strength in [0,1]");
  gen_cmd->add_option("--size-correlation", gen.size_correlation, "region_size_answer_correlation in [0,1]");
  gen_cmd->add_option("--location-cluster", gen.location_cluster, "location_cluster_strength in [0,1]");
  gen_cmd->add_option("--global-fraction", gen.global_fraction, "Fraction of whole-image questions");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model for one prompt mode");
  add_common(train_cmd, tr.common);
  auto* data_opt = train_cmd->add_option("--data", tr.data, "Dataset directory holding train.json and val.json");
  auto* train_opt = train_cmd->add_option("--train", tr.train_manifest, "Training manifest (instead of --data)");
  train_cmd->add_option("--val", tr.val_manifest, "Validation manifest (instead of --data)");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--mode", tr.mode, "Prompt mode")
      ->check(CLI::IsMember(mode_names()));
  train_cmd->add_option("--epochs", tr.epochs, "Epochs");
  train_cmd->add_option("--max-steps", tr.max_steps, "Optimizer step cap (0: epochs)");
  train_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
  train_cmd->add_option("--lr", tr.lr, "Peak learning rate");
  train_cmd->add_option("--val-max-samples", tr.val_max_samples, "Validation subset size (0: all)");
  data_opt->excludes(train_opt);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Manifest JSON")->required();
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_option("--workers", ev.workers, "Parallel inference workers")->check(CLI::PositiveNumber);

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare checkpoints on one test manifest");
  cmp_cmd->add_option("--checkpoint", cmp.checkpoints, "[label=]path, repeatable")->required();
  cmp_cmd->add_option("--manifest", cmp.manifest, "Manifest JSON")->required();
  cmp_cmd->add_option("--out", cmp.out, "Output directory")->required();
  cmp_cmd->add_option("--workers", cmp.workers, "Parallel inference workers")->check(CLI::PositiveNumber);

  ErrorMapArgs em;
  auto* em_cmd = app.add_subcommand("error-maps", "Render TP/FP/TN/FN region-location maps from a dump");
  em_cmd->add_option("--dump", em.dump, "Per-sample dump JSON")->required();
  em_cmd->add_option("--manifest", em.manifest, "Manifest the dump was produced on")->required();
  em_cmd->add_option("--out", em.out, "Output directory")->required();
  em_cmd->add_option("--prefix", em.prefix, "File name prefix (default: dump file stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) {
      if (tr.data.empty() && (tr.train_manifest.empty() || tr.val_manifest.empty())) {
        throw Error(ErrorCode::invalid_config, "train needs --data or both --train and --val");
      }
      return cmd_train(tr);
    }
    if (*eval_cmd) return cmd_eval(ev);
    if (*cmp_cmd) return cmd_compare(cmp);
    if (*em_cmd) return cmd_error_maps(em);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io_error]: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
