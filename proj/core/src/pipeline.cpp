#include "iu4rec/pipeline.hpp"

#include "iu4rec/errors.hpp"

namespace iu4rec {

SynthOutput synthesize(const PipelineConfig& cfg) {
  SynthOutput out;
  out.world = generate_catalog(cfg.world, cfg.world_seed);
  out.events = simulate_log(out.world, cfg.log_days, cfg.exposure, cfg.log_seed);
  return out;
}

IuCatalog build_units(const PipelineConfig& cfg, const World& world) { return IuCatalog::build(world.items, cfg.iu); }

FeatureStore make_feature_store(const PipelineConfig& cfg, const World& world, const IuCatalog& units) {
  return FeatureStore(FeatureCatalog::from(world, units), cfg.features);
}

std::vector<TrainingSample> select_days(std::span<const TrainingSample> samples, int first_day, int last_day) {
  std::vector<TrainingSample> out;
  for (const auto& s : samples) {
    if (s.day >= first_day && s.day <= last_day) out.push_back(s);
  }
  return out;
}

ModelConfig model_config(const PipelineConfig& cfg, ModelKind kind) {
  ModelConfig m = cfg.model;
  m.kind = kind;
  return m;
}

std::vector<ScoredSample> score_samples(const CtrModel& model, std::span<const TrainingSample> samples) {
  std::vector<ScoredSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.user_id, model.predict(s), s.label, s.iu_domain});
  return out;
}

ServingState serving_state(const PipelineConfig& cfg, const World& world, const IuCatalog& units,
                           std::span<const InteractionEvent> events) {
  ServingState state{world, make_feature_store(cfg, world, units)};
  for (const auto& e : events) state.store.observe(e);
  return state;
}

OfflineResult run_offline(const PipelineConfig& cfg, std::span<const TrainingSample> samples, const Vocab& vocab,
                          const ProgressFn& progress) {
  const auto train_set = select_days(samples, 1, cfg.train_last_day);
  const auto test_set = select_days(samples, cfg.test_day, cfg.test_day);
  if (train_set.empty()) throw DataError("offline run: no training samples");
  if (test_set.empty()) throw DataError("offline run: no test samples");
  OfflineResult result;
  for (ModelKind kind : cfg.kinds) {
    CtrModel model(model_config(cfg, kind), vocab);
    result.curves.push_back(train(model, train_set, cfg.train));
    ModelRow row;
    row.model = std::string(to_string(kind));
    row.metrics = domain_split_eval(score_samples(model, test_set));
    if (progress) {
      progress(row.model + " trained: " + std::to_string(result.curves.back().steps) + " steps, test AUC " +
               (row.metrics.overall_auc ? std::to_string(*row.metrics.overall_auc) : std::string("undefined")));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace iu4rec
