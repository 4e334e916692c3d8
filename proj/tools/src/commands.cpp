#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "iu4rec/errors.hpp"
#include "iu4rec/io.hpp"
#include "iu4rec/pipeline.hpp"
#include "iu4rec/rng.hpp"

namespace iu4rec::cli {

namespace fs = std::filesystem;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("iu4rec");
  logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("IU4REC_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("IU4REC_LOG='{}' is not one of error, info, debug; using info", level);
  }
}

Context make_context(const std::optional<std::string>& config_path, std::optional<std::uint64_t> seed,
                     const fs::path& out) {
  Context ctx;
  ctx.cfg = config_path ? load_config(*config_path) : PipelineConfig{};
  if (seed) override_seeds(ctx.cfg, *seed);
  validate(ctx.cfg);
  ctx.out = out;
  ctx.digest = config_digest(ctx.cfg);
  return ctx;
}

namespace {

fs::path model_dir(const Context& ctx, ModelKind kind) { return ctx.out / "models" / std::string(to_string(kind)); }

// Fails with the command that produces a missing input.
void require(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw Error("missing input '" + path.string() + "': run " + producer + " first");
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// manifest.json records the config and a content hash per output file.
void record_outputs(const Context& ctx, const std::vector<fs::path>& files) {
  const fs::path path = ctx.out / "manifest.json";
  OrderedJson manifest;
  if (fs::exists(path)) {
    manifest = OrderedJson::parse(read_file(path));
    if (manifest.value("config_digest", "") != hex64(ctx.digest)) manifest = OrderedJson();
  }
  if (manifest.is_null()) {
    manifest["config_digest"] = hex64(ctx.digest);
    manifest["config"] = to_json(ctx.cfg);
    manifest["outputs"] = OrderedJson::object();
  }
  for (const auto& f : files) {
    manifest["outputs"][fs::relative(f, ctx.out).generic_string()] = hex64(fnv1a64(read_file(f)));
  }
  write_json(path, manifest);
}

World load_world(const Context& ctx) {
  require(ctx.out / "catalog.jsonl", "synth");
  require(ctx.out / "users.jsonl", "synth");
  require(ctx.out / "unit_centers.jsonl", "synth");
  return read_world(ctx.out, ctx.cfg.world);
}

IuCatalog load_units(const Context& ctx) {
  require(ctx.out / "units.jsonl", "build-iu");
  return IuCatalog::from_units(read_units(ctx.out / "units.jsonl"));
}

std::vector<InteractionEvent> load_events(const Context& ctx) {
  require(ctx.out / "events.jsonl", "synth");
  return read_events(ctx.out / "events.jsonl");
}

std::vector<TrainingSample> load_samples(const Context& ctx) {
  require(ctx.out / "features.jsonl", "featurize");
  spdlog::debug("reading features.jsonl");
  return read_samples(ctx.out / "features.jsonl");
}

CtrModel load_model(const Context& ctx, ModelKind kind, const Vocab& vocab) {
  const fs::path path = model_dir(ctx, kind) / "model.iu4r";
  if (!fs::exists(path)) {
    throw Error("no checkpoint for " + std::string(to_string(kind)) + " at '" + path.string() + "': run train first");
  }
  CtrModel model(model_config(ctx.cfg, kind), vocab);
  const CheckpointInfo info = load_checkpoint(path, model);
  if (info.digest != ctx.digest) {
    spdlog::warn("{} was written under config {} but the current config is {}", path.string(), hex64(info.digest),
                 hex64(ctx.digest));
  }
  return model;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void synth(const Context& ctx) {
  spdlog::info("synth: {} users, {} items, {} logged days", ctx.cfg.world.n_users, ctx.cfg.world.n_items,
               ctx.cfg.log_days);
  const SynthOutput out = synthesize(ctx.cfg);
  fs::create_directories(ctx.out);
  write_world(ctx.out, out.world);
  write_events(ctx.out / "events.jsonl", out.events);
  spdlog::info("synth: {} events", out.events.size());
  record_outputs(ctx, {ctx.out / "users.jsonl", ctx.out / "catalog.jsonl", ctx.out / "unit_centers.jsonl",
                       ctx.out / "events.jsonl"});
}

void build_iu(const Context& ctx) {
  const World world = load_world(ctx);
  const auto events = load_events(ctx);
  spdlog::info("build-iu: clustering {} items", world.items.size());
  const IuCatalog units = build_units(ctx.cfg, world);
  write_units(ctx.out / "units.jsonl", units.units());
  OrderedJson coverage;
  coverage["config_digest"] = hex64(ctx.digest);
  coverage["rows"] = OrderedJson::array();
  for (const auto& row : coverage_report(units, world.items.size(), events)) {
    OrderedJson r;
    r["iu_type"] = row.iu_type;
    r["unit_count"] = row.unit_count;
    r["product_coverage_pct"] = row.product_coverage;
    r["exposure_pct"] = row.exposure_ratio;
    r["click_pct"] = row.click_ratio;
    r["transaction_pct"] = row.transaction_ratio;
    r["ctr_improvement_pct"] = row.ctr_improvement ? OrderedJson(*row.ctr_improvement) : OrderedJson("undefined");
    coverage["rows"].push_back(std::move(r));
    spdlog::info("build-iu: {:<8} units {:>5}  coverage {:6.2f}%", row.iu_type, row.unit_count, row.product_coverage);
  }
  write_json(ctx.out / "coverage.json", coverage);
  record_outputs(ctx, {ctx.out / "units.jsonl", ctx.out / "coverage.json"});
}

void featurize(const Context& ctx) {
  const World world = load_world(ctx);
  const IuCatalog units = load_units(ctx);
  const auto events = load_events(ctx);
  FeatureStore store = make_feature_store(ctx.cfg, world, units);
  std::vector<fs::path> outputs;
  store.on_snapshot([&](int day, const IuStatsTable& stats) {
    std::vector<OrderedJson> records;
    for (std::size_t i = 1; i < stats.size(); ++i) records.push_back(to_record(stats[i]));
    const fs::path path = ctx.out / ("iu_stats_day" + std::to_string(day) + ".jsonl");
    write_jsonl(path, records);
    outputs.push_back(path);
    std::size_t flagged = 0;
    for (const auto& s : stats) flagged += s.clicks_exceed_impressions() ? 1 : 0;
    if (flagged > 0) spdlog::warn("featurize: day {} snapshot has {} units with clicks > impressions", day, flagged);
  });
  const auto samples = iu4rec::featurize(events, store);
  write_samples(ctx.out / "features.jsonl", samples);
  outputs.push_back(ctx.out / "features.jsonl");
  spdlog::info("featurize: {} samples", samples.size());
  record_outputs(ctx, outputs);
}

void train(const Context& ctx) {
  const World world = load_world(ctx);
  const IuCatalog units = load_units(ctx);
  const Vocab vocab = Vocab::from(FeatureCatalog::from(world, units));
  const auto samples = load_samples(ctx);
  const auto train_set = select_days(samples, 1, ctx.cfg.train_last_day);
  if (train_set.empty()) throw Error("train: no samples in days 1.." + std::to_string(ctx.cfg.train_last_day));
  std::vector<fs::path> outputs;
  for (ModelKind kind : ctx.cfg.kinds) {
    const std::string name(to_string(kind));
    spdlog::info("train: {} on {} samples", name, train_set.size());
    CtrModel model(model_config(ctx.cfg, kind), vocab);
    const TrainResult result = iu4rec::train(model, train_set, ctx.cfg.train, [&](std::size_t step, double loss) {
      spdlog::debug("train: {} step {} loss {:.5f}", name, step, loss);
    });
    const fs::path dir = model_dir(ctx, kind);
    save_checkpoint(dir / "model.iu4r", model, ctx.digest);
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
      csv += std::to_string(i + 1) + "," + format_double(result.loss_curve[i]) + "\n";
    }
    write_text(dir / "loss_curve.csv", csv);
    outputs.push_back(dir / "model.iu4r");
    outputs.push_back(dir / "loss_curve.csv");
    spdlog::info("train: {} done, final batch loss {:.5f}", name, result.loss_curve.back());
  }
  record_outputs(ctx, outputs);
}

void eval(const Context& ctx) {
  const World world = load_world(ctx);
  const IuCatalog units = load_units(ctx);
  const Vocab vocab = Vocab::from(FeatureCatalog::from(world, units));
  for (ModelKind kind : ctx.cfg.kinds) {
    if (!fs::exists(model_dir(ctx, kind) / "model.iu4r")) {
      throw Error("no checkpoint for " + std::string(to_string(kind)) + ": run train first");
    }
  }
  const auto samples = load_samples(ctx);
  const auto test_set = select_days(samples, ctx.cfg.test_day, ctx.cfg.test_day);
  if (test_set.empty()) throw Error("eval: no samples on day " + std::to_string(ctx.cfg.test_day));
  std::vector<ModelRow> rows;
  std::vector<fs::path> outputs;
  for (ModelKind kind : ctx.cfg.kinds) {
    const CtrModel model = load_model(ctx, kind, vocab);
    const auto scored = score_samples(model, test_set);
    const fs::path path = model_dir(ctx, kind) / "scored_samples.jsonl";
    write_scored(path, scored);
    outputs.push_back(path);
    ModelRow row;
    row.model = std::string(to_string(kind));
    row.metrics = domain_split_eval(scored);
    rows.push_back(std::move(row));
  }
  const EvalReport report = make_report(std::move(rows), ctx.cfg.base_model);
  OrderedJson doc;
  doc["config_digest"] = hex64(ctx.digest);
  doc["test_day"] = ctx.cfg.test_day;
  const OrderedJson body = to_json(report);
  for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
  write_json(ctx.out / "report.json", doc);
  outputs.push_back(ctx.out / "report.json");
  for (const auto& r : report.rows) {
    spdlog::info("eval: {:<10} AUC {:.4f}  GAUC {:.4f}  RI {:+.2f}%", r.model, r.metrics.overall_auc.value_or(0.0),
                 r.metrics.overall_gauc.value_or(0.0), r.ri_overall_auc.value_or(0.0));
  }
  record_outputs(ctx, outputs);
}

namespace {

ServingState load_serving_state(const Context& ctx, const IuCatalog& units) {
  const World world = load_world(ctx);
  const auto events = load_events(ctx);
  return serving_state(ctx.cfg, world, units, events);
}

OrderedJson outcome_json(const SessionOutcome& o) {
  auto counters = [](const SurfaceCounters& c) {
    return OrderedJson{{"impressions", c.impressions}, {"clicks", c.clicks}, {"bills", c.transactions}, {"ctr", c.ctr()}};
  };
  OrderedJson j;
  j["overall"] = counters(o.overall());
  j["interest_unit_rec"] = counters(o.iu_domain());
  j["general_product_rec"] = counters(o.normal());
  j["by_surface"] = {{"homepage", counters(o.at(Surface::kHomepage))},
                     {"iu_card", counters(o.at(Surface::kIuCard))},
                     {"iu_page", counters(o.at(Surface::kIuPage))}};
  j["gmv"] = o.gmv();
  return j;
}

}  // namespace

void simulate(const Context& ctx) {
  const IuCatalog units = load_units(ctx);
  ServingState state = load_serving_state(ctx, units);
  const Vocab vocab = Vocab::from(state.store.catalog());
  const CtrModel model = load_model(ctx, ctx.cfg.sim_model, vocab);
  spdlog::info("simulate: {} serving days {}..{}", to_string(ctx.cfg.sim_model), ctx.cfg.sim.first_day,
               ctx.cfg.sim.first_day + ctx.cfg.sim.horizon_days - 1);
  const SimResult result = run_sessions(state, units, model, ctx.cfg.sim, Rng::derive(ctx.cfg.sim_seed, 1),
                                        Rng::derive(ctx.cfg.sim_seed, 2));
  write_events(ctx.out / "sim_events.jsonl", result.events);
  OrderedJson doc;
  doc["config_digest"] = hex64(ctx.digest);
  doc["model"] = std::string(to_string(ctx.cfg.sim_model));
  doc["sessions"] = result.sessions;
  doc["outcome"] = outcome_json(result.outcome);
  write_json(ctx.out / "sim_report.json", doc);
  spdlog::info("simulate: {} sessions, CTR {:.4f}, bills {}", result.sessions, result.outcome.overall().ctr(),
               result.outcome.overall().transactions);
  record_outputs(ctx, {ctx.out / "sim_events.jsonl", ctx.out / "sim_report.json"});
}

void ab_test(const Context& ctx) {
  const IuCatalog units = load_units(ctx);
  const ServingState state = load_serving_state(ctx, units);
  const Vocab vocab = Vocab::from(state.store.catalog());
  const CtrModel a = load_model(ctx, ctx.cfg.ab_model_a, vocab);
  const CtrModel b = load_model(ctx, ctx.cfg.ab_model_b, vocab);
  spdlog::info("ab-test: {} (A) vs {} (B)", to_string(a.kind()), to_string(b.kind()));
  const AbReport report = run_ab_test(state, units, a, b, ctx.cfg.ab, ctx.cfg.sim, ctx.cfg.sim_seed);
  OrderedJson doc;
  doc["config_digest"] = hex64(ctx.digest);
  const OrderedJson body = to_json(report);
  for (auto it = body.begin(); it != body.end(); ++it) doc[it.key()] = it.value();
  write_json(ctx.out / "ab_report.json", doc);
  spdlog::info("ab-test: Interest Unit Rec CTR {:+.2f}%, Overall CTR {:+.2f}%", report.interest_unit.ctr_pct,
               report.overall.ctr_pct);
  record_outputs(ctx, {ctx.out / "ab_report.json"});
}

void all(const Context& ctx) {
  synth(ctx);
  build_iu(ctx);
  featurize(ctx);
  train(ctx);
  eval(ctx);
  simulate(ctx);
  ab_test(ctx);
}

}  // namespace iu4rec::cli
