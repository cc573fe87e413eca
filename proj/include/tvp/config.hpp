#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "tvp/generator.hpp"
#include "tvp/training.hpp"

namespace tvp {

// JSON mirrors of the config structs. The *_from_json readers start from `base`, override the
// keys that are present and reject unknown keys with invalid_config.
nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig base = {});

nlohmann::json to_json(const PromptTemplate& tpl);
PromptTemplate prompt_template_from_json(const nlohmann::json& j, PromptTemplate base = {});

nlohmann::json to_json(const AssemblyOptions& opts);
AssemblyOptions assembly_options_from_json(const nlohmann::json& j, AssemblyOptions base = {});

nlohmann::json to_json(const DecodeOptions& opts);
DecodeOptions decode_options_from_json(const nlohmann::json& j, DecodeOptions base = {});

// One file for a whole run: {"seed", "generator", "model", "train", "prompt"}. A top-level
// seed propagates to the generator and the trainer.
struct RunConfig {
  GeneratorConfig generator;
  ModelConfig model;
  TrainConfig train;
  PromptTemplate prompt;
  std::uint64_t seed = 0;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace tvp
