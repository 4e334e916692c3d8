#pragma once

// Pipeline configuration: one JSON document with a block per stage. Unknown
// keys and type mismatches are rejected with the offending line number.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iu4rec/ctr_model.hpp"
#include "iu4rec/feature_store.hpp"
#include "iu4rec/iu_construction.hpp"
#include "iu4rec/marketplace.hpp"
#include "iu4rec/two_stage_sim.hpp"

namespace iu4rec {

struct PipelineConfig {
  // world
  WorldConfig world;
  std::uint64_t world_seed = 11;
  int log_days = 8;
  ExposurePolicy exposure;
  std::uint64_t log_seed = 12;

  // iu
  IuBuildConfig iu{.seed = 13};

  // features
  FeatureConfig features;

  // model
  std::vector<ModelKind> kinds{ModelKind::kDnn, ModelKind::kDin, ModelKind::kIuBoosted};
  ModelConfig model{.seed = 14};
  TrainConfig train{.learning_rate = 0.03, .seed = 15};

  // eval
  int train_last_day = 7;
  int test_day = 8;
  std::string base_model = "DIN";

  // simulation
  SimConfig sim;
  ModelKind sim_model = ModelKind::kIuBoosted;
  AbConfig ab;
  ModelKind ab_model_a = ModelKind::kDin;
  ModelKind ab_model_b = ModelKind::kIuBoosted;
  std::uint64_t sim_seed = 16;
};

// Throws ConfigError ("<source>:<line>: message") on malformed input.
PipelineConfig parse_config(std::string_view text, std::string_view source = "<config>");
PipelineConfig load_config(const std::string& path);

// Canonical form: every field, fixed key order.
nlohmann::ordered_json to_json(const PipelineConfig& cfg);

// Replaces every stage seed with one derived from `seed`.
void override_seeds(PipelineConfig& cfg, std::uint64_t seed);

// Semantic checks across blocks.
void validate(const PipelineConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t config_digest(const PipelineConfig& cfg);
std::string hex64(std::uint64_t value);

}  // namespace iu4rec
