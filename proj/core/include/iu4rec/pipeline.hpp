#pragma once

// In-process building blocks of the end-to-end pipeline. The command line
// tool wraps these with file IO.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iu4rec/config.hpp"
#include "iu4rec/ctr_model.hpp"
#include "iu4rec/feature_store.hpp"
#include "iu4rec/iu_construction.hpp"
#include "iu4rec/marketplace.hpp"
#include "iu4rec/metrics.hpp"
#include "iu4rec/two_stage_sim.hpp"

namespace iu4rec {

// Generates the world and its logged days. `world` ends in the post-log
// stock state.
struct SynthOutput {
  World world;
  std::vector<InteractionEvent> events;
};
SynthOutput synthesize(const PipelineConfig& cfg);

IuCatalog build_units(const PipelineConfig& cfg, const World& world);

FeatureStore make_feature_store(const PipelineConfig& cfg, const World& world, const IuCatalog& units);

// Samples with first_day <= day <= last_day.
std::vector<TrainingSample> select_days(std::span<const TrainingSample> samples, int first_day, int last_day);

ModelConfig model_config(const PipelineConfig& cfg, ModelKind kind);

std::vector<ScoredSample> score_samples(const CtrModel& model, std::span<const TrainingSample> samples);

// Store state after replaying the whole log, ready to serve the next day.
ServingState serving_state(const PipelineConfig& cfg, const World& world, const IuCatalog& units,
                           std::span<const InteractionEvent> events);

// Everything the offline comparison needs, computed in memory.
struct OfflineResult {
  std::vector<ModelRow> rows;
  std::vector<TrainResult> curves;
};
using ProgressFn = std::function<void(const std::string&)>;
OfflineResult run_offline(const PipelineConfig& cfg, std::span<const TrainingSample> samples, const Vocab& vocab,
                          const ProgressFn& progress = {});

}  // namespace iu4rec
