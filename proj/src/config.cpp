#include "tvp/config.hpp"

#include <fstream>
#include <set>

#include "tvp/error.hpp"

namespace tvp {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_config, std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::invalid_config, std::string("unknown ") + what + " key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_config, std::string("key '") + key + "': " + e.what());
  }
}

const char* shape_name(const std::optional<ObjectShape>& s) {
  if (!s) return "any";
  return *s == ObjectShape::disc ? "disc" : "square";
}

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

void read_rgb(const json& j, const char* key, Rgb& out) {
  if (!j.contains(key)) return;
  std::vector<int> v;
  read(j, key, v);
  if (v.size() != 3) throw Error(ErrorCode::invalid_config, std::string(key) + " must have 3 entries");
  for (int c = 0; c < 3; ++c) {
    if (v[c] < 0 || v[c] > 255) throw Error(ErrorCode::invalid_config, std::string(key) + " out of range");
    out[c] = static_cast<std::uint8_t>(v[c]);
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"image_size", c.image_size}, {"patch_size", c.patch_size},     {"d_vis", c.d_vis},
          {"encoder_blocks", c.encoder_blocks}, {"d_model", c.d_model}, {"decoder_blocks", c.decoder_blocks},
          {"heads", c.heads},           {"mlp_ratio", c.mlp_ratio},       {"vocab_size", c.vocab_size},
          {"max_seq_len", c.max_seq_len}, {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  reject_unknown(j, {"image_size", "patch_size", "d_vis", "encoder_blocks", "d_model", "decoder_blocks",
                     "heads", "mlp_ratio", "vocab_size", "max_seq_len", "dropout"},
                 "model");
  read(j, "image_size", c.image_size);
  read(j, "patch_size", c.patch_size);
  read(j, "d_vis", c.d_vis);
  read(j, "encoder_blocks", c.encoder_blocks);
  read(j, "d_model", c.d_model);
  read(j, "decoder_blocks", c.decoder_blocks);
  read(j, "heads", c.heads);
  read(j, "mlp_ratio", c.mlp_ratio);
  read(j, "vocab_size", c.vocab_size);
  read(j, "max_seq_len", c.max_seq_len);
  read(j, "dropout", c.dropout);
  return c;
}

json to_json(const DecodeOptions& o) {
  return {{"max_new_tokens", o.max_new_tokens},
          {"repetition_penalty", o.repetition_penalty},
          {"length_penalty", o.length_penalty}};
}

DecodeOptions decode_options_from_json(const json& j, DecodeOptions o) {
  reject_unknown(j, {"max_new_tokens", "repetition_penalty", "length_penalty"}, "decode");
  read(j, "max_new_tokens", o.max_new_tokens);
  read(j, "repetition_penalty", o.repetition_penalty);
  read(j, "length_penalty", o.length_penalty);
  return o;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"min_lr", c.min_lr},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"grad_clip", c.grad_clip},
          {"seed", c.seed},
          {"mode", std::string(to_string(c.mode))},
          {"max_steps", c.max_steps},
          {"val_max_samples", c.val_max_samples},
          {"max_answer_tokens", c.max_answer_tokens},
          {"keep_best", c.keep_best},
          {"decode", to_json(c.decode)}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j, {"epochs", "batch_size", "lr", "min_lr", "weight_decay", "beta1", "beta2", "adam_eps",
                     "grad_clip", "seed", "mode", "max_steps", "val_max_samples", "max_answer_tokens",
                     "keep_best", "decode"},
                 "train");
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.lr);
  read(j, "min_lr", c.min_lr);
  read(j, "weight_decay", c.weight_decay);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "grad_clip", c.grad_clip);
  read(j, "seed", c.seed);
  if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
  read(j, "max_steps", c.max_steps);
  read(j, "val_max_samples", c.val_max_samples);
  read(j, "max_answer_tokens", c.max_answer_tokens);
  read(j, "keep_best", c.keep_best);
  if (j.contains("decode")) c.decode = decode_options_from_json(j["decode"], c.decode);
  return c;
}

json to_json(const GeneratorConfig& c) {
  json classes = json::array();
  for (const auto& k : c.classes) {
    classes.push_back({{"name", k.name},
                       {"shape", shape_name(k.shape)},
                       {"color", rgb_json(k.color)},
                       {"queried", k.queried}});
  }
  return {{"name", c.name},
          {"image_size", c.image_size},
          {"n_images", c.n_images},
          {"questions_per_image", c.questions_per_image},
          {"classes", classes},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"min_radius", c.min_radius},
          {"max_radius", c.max_radius},
          {"min_region", c.min_region},
          {"max_region", c.max_region},
          {"ellipse_fraction", c.ellipse_fraction},
          {"global_question_fraction", c.global_question_fraction},
          {"train_fraction", c.train_fraction},
          {"val_fraction", c.val_fraction},
          {"region_size_answer_correlation", c.region_size_answer_correlation},
          {"location_cluster_strength", c.location_cluster_strength},
          {"context_cue_strength", c.context_cue_strength},
          {"rim_color", rgb_json(c.rim_color)},
          {"core_fraction", c.core_fraction},
          {"color_jitter", c.color_jitter},
          {"background_noise", c.background_noise},
          {"seed", c.seed}};
}

GeneratorConfig generator_config_from_json(const json& j, GeneratorConfig c) {
  reject_unknown(j, {"name", "preset", "image_size", "n_images", "questions_per_image", "classes", "min_objects",
                     "max_objects", "min_radius", "max_radius", "min_region", "max_region", "ellipse_fraction",
                     "global_question_fraction", "train_fraction", "val_fraction",
                     "region_size_answer_correlation", "location_cluster_strength", "context_cue_strength",
                     "rim_color", "core_fraction", "color_jitter", "background_noise", "seed"},
                 "generator");
  if (j.contains("preset")) {
    const auto preset = j["preset"].get<std::string>();
    if (preset == "biased") {
      c = GeneratorConfig::biased();
    } else if (preset != "default") {
      throw Error(ErrorCode::invalid_config, "unknown generator preset '" + preset + "'");
    }
  }
  read(j, "name", c.name);
  read(j, "image_size", c.image_size);
  read(j, "n_images", c.n_images);
  read(j, "questions_per_image", c.questions_per_image);
  if (j.contains("classes")) {
    c.classes.clear();
    for (const auto& k : j["classes"]) {
      reject_unknown(k, {"name", "shape", "color", "queried"}, "class");
      ObjectClass oc;
      read(k, "name", oc.name);
      std::string shape = "any";
      read(k, "shape", shape);
      if (shape == "disc") {
        oc.shape = ObjectShape::disc;
      } else if (shape == "square") {
        oc.shape = ObjectShape::square;
      } else if (shape != "any") {
        throw Error(ErrorCode::invalid_config, "shape must be disc, square or any");
      }
      read_rgb(k, "color", oc.color);
      read(k, "queried", oc.queried);
      c.classes.push_back(oc);
    }
  }
  read(j, "min_objects", c.min_objects);
  read(j, "max_objects", c.max_objects);
  read(j, "min_radius", c.min_radius);
  read(j, "max_radius", c.max_radius);
  read(j, "min_region", c.min_region);
  read(j, "max_region", c.max_region);
  read(j, "ellipse_fraction", c.ellipse_fraction);
  read(j, "global_question_fraction", c.global_question_fraction);
  read(j, "train_fraction", c.train_fraction);
  read(j, "val_fraction", c.val_fraction);
  read(j, "region_size_answer_correlation", c.region_size_answer_correlation);
  read(j, "location_cluster_strength", c.location_cluster_strength);
  read(j, "context_cue_strength", c.context_cue_strength);
  read_rgb(j, "rim_color", c.rim_color);
  read(j, "core_fraction", c.core_fraction);
  read(j, "color_jitter", c.color_jitter);
  read(j, "background_noise", c.background_noise);
  read(j, "seed", c.seed);
  return c;
}

json to_json(const PromptTemplate& t) {
  return {{"instruction", t.instruction},
          {"detail_prefix", t.detail_prefix},
          {"question_wrapper", t.question_wrapper},
          {"baseline_template", t.baseline_template}};
}

PromptTemplate prompt_template_from_json(const json& j, PromptTemplate t) {
  reject_unknown(j, {"instruction", "detail_prefix", "question_wrapper", "baseline_template"}, "prompt");
  read(j, "instruction", t.instruction);
  read(j, "detail_prefix", t.detail_prefix);
  read(j, "question_wrapper", t.question_wrapper);
  read(j, "baseline_template", t.baseline_template);
  return t;
}

json to_json(const AssemblyOptions& o) {
  return {{"outline_color", rgb_json(o.outline_color)},
          {"outline_thickness", o.outline_thickness},
          {"blank_fill", rgb_json(o.blank_fill)}};
}

AssemblyOptions assembly_options_from_json(const json& j, AssemblyOptions o) {
  reject_unknown(j, {"outline_color", "outline_thickness", "blank_fill"}, "assembly");
  read_rgb(j, "outline_color", o.outline_color);
  read(j, "outline_thickness", o.outline_thickness);
  read_rgb(j, "blank_fill", o.blank_fill);
  return o;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"seed", "generator", "model", "train", "prompt"}, "run config");
  RunConfig rc;
  if (j.contains("generator")) rc.generator = generator_config_from_json(j["generator"]);
  if (j.contains("model")) rc.model = model_config_from_json(j["model"]);
  if (j.contains("train")) rc.train = train_config_from_json(j["train"]);
  if (j.contains("prompt")) rc.prompt = prompt_template_from_json(j["prompt"]);
  if (j.contains("seed")) {
    read(j, "seed", rc.seed);
    rc.generator.seed = rc.seed;
    rc.train.seed = rc.seed;
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::invalid_config, "config file " + path.string() + " not found");
  std::ifstream in(path);
  try {
    return run_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_config, path.string() + ": " + e.what());
  }
}

}  // namespace tvp
