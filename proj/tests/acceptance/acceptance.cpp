// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "iu4rec/config.hpp"
#include "iu4rec/errors.hpp"
#include "iu4rec/metrics.hpp"
#include "iu4rec/numeric.hpp"
#include "iu4rec/pipeline.hpp"
#include "iu4rec/rng.hpp"

using namespace iu4rec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared default-world runs, seeds 1..5.

constexpr int kSeeds = 5;

struct SeedRun {
  PipelineConfig cfg;
  double offline_seconds = 0.0;
  std::map<ModelKind, double> overall_auc;
  std::optional<AbReport> ab;
  // Seed 1 keeps everything for the serving and feature audits.
  std::optional<SynthOutput> synth;
  std::optional<IuCatalog> units;
  std::optional<FeatureStore> store;
  std::vector<TrainingSample> samples;
  std::vector<InteractionEvent> log;
  std::map<ModelKind, std::unique_ptr<CtrModel>> models;
};

std::map<int, std::unique_ptr<SeedRun>> g_runs;

PipelineConfig seeded_default(int seed) {
  PipelineConfig cfg;
  override_seeds(cfg, static_cast<std::uint64_t>(seed));
  validate(cfg);
  return cfg;
}

SeedRun& seed_run(int seed) {
  auto& slot = g_runs[seed];
  if (slot) return *slot;
  auto run = std::make_unique<SeedRun>();
  run->cfg = seeded_default(seed);
  const PipelineConfig& cfg = run->cfg;

  const auto t0 = Clock::now();
  SynthOutput synth = synthesize(cfg);
  IuCatalog units = build_units(cfg, synth.world);
  FeatureStore store = make_feature_store(cfg, synth.world, units);
  std::vector<TrainingSample> samples = featurize(synth.events, store);
  const Vocab vocab = Vocab::from(store.catalog());
  const auto train_set = select_days(samples, 1, cfg.train_last_day);
  const auto test_set = select_days(samples, cfg.test_day, cfg.test_day);
  std::map<ModelKind, std::unique_ptr<CtrModel>> models;
  for (ModelKind kind : cfg.kinds) {
    auto model = std::make_unique<CtrModel>(model_config(cfg, kind), vocab);
    train(*model, train_set, cfg.train);
    const DomainMetrics m = domain_split_eval(score_samples(*model, test_set));
    run->overall_auc[kind] = m.overall_auc.value_or(std::nan(""));
    models[kind] = std::move(model);
  }
  run->offline_seconds = seconds_since(t0);

  const ServingState base = serving_state(cfg, synth.world, units, synth.events);
  run->ab = run_ab_test(base, units, *models.at(cfg.ab_model_a), *models.at(cfg.ab_model_b), cfg.ab, cfg.sim,
                        cfg.sim_seed);
  std::fprintf(stderr, "  seed %d: offline %.0fs, DNN %.4f DIN %.4f IU_BOOSTED %.4f\n", seed, run->offline_seconds,
               run->overall_auc[ModelKind::kDnn], run->overall_auc[ModelKind::kDin],
               run->overall_auc[ModelKind::kIuBoosted]);

  if (seed == 1) {
    run->log = synth.events;
    run->synth = std::move(synth);
    run->units = std::move(units);
    run->store = std::move(store);
    run->samples = std::move(samples);
    run->models = std::move(models);
  }
  slot = std::move(run);
  return *slot;
}

// ---------------------------------------------------------------------------

Verdict c1_rela_impr() {
  const double up = rela_impr(0.7411, 0.7366);
  const double down = rela_impr(0.7335, 0.7366);
  // Printed values: +1.91% and -1.30%.
  const bool ok = std::abs(up - 1.91) <= 0.02 && std::abs(down + 1.30) <= 0.02;
  return {ok, fmt("RelaImpr(0.7411, 0.7366) = %+.4f%%, RelaImpr(0.7335, 0.7366) = %+.4f%%", up, down)};
}

Verdict c2_auc_brute_force() {
  const auto t0 = Clock::now();
  Rng rng(2);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.bernoulli(0.5) ? static_cast<double>(rng.below(10)) / 10.0 : rng.uniform();
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j] != 0) continue;
        pairs += 1.0;
        wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
    }
    worst = std::max(worst, std::abs(auc(scores, labels) - wins / pairs));
    ++checked;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 10.0, fmt("%d sets, max |rank - brute| = %.2e, %.2fs", checked, worst, secs)};
}

Verdict c3_gauc() {
  // User 1: AUC 1 over 4 impressions. User 2: 6 of 9 pairs over 6 impressions.
  const std::vector<ScoredSample> hand{
      {1, 0.9, 1, false}, {1, 0.8, 1, false}, {1, 0.2, 0, false},  {1, 0.1, 0, false},
      {2, 0.9, 1, false}, {2, 0.45, 1, false}, {2, 0.05, 1, false}, {2, 0.4, 0, false},
      {2, 0.3, 0, false}, {2, 0.1, 0, false},
  };
  const double g = gauc(hand);
  bool bounded = true;
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredSample> samples;
    const std::uint32_t users = 2 + static_cast<std::uint32_t>(rng.below(8));
    for (std::uint32_t u = 1; u <= users; ++u) {
      const std::size_t n = 1 + rng.below(40);
      for (std::size_t i = 0; i < n; ++i) {
        samples.push_back({u, rng.uniform(), static_cast<std::uint8_t>(rng.bernoulli(0.3) ? 1 : 0), false});
      }
    }
    samples.push_back({1, rng.uniform(), 1, false});
    samples.push_back({1, rng.uniform(), 0, false});
    const auto per_user = per_user_auc(samples);
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& u : per_user) {
      lo = std::min(lo, u.auc);
      hi = std::max(hi, u.auc);
    }
    const double v = gauc(samples);
    bounded = bounded && v >= lo - 1e-15 && v <= hi + 1e-15;
  }
  return {g == 0.8 && bounded, fmt("hand case GAUC = %.17g, 100 random sets within per-user range: %s", g,
                                   bounded ? "yes" : "no")};
}

TrainingSample random_sample(Rng& rng, const Vocab& v) {
  auto item = [&] {
    return ItemFeatures{static_cast<std::uint32_t>(1 + rng.below(v.items)),
                        static_cast<std::uint32_t>(1 + rng.below(v.categories)),
                        static_cast<std::uint32_t>(1 + rng.below(v.brands))};
  };
  TrainingSample s;
  s.user_id = static_cast<std::uint32_t>(1 + rng.below(v.users));
  s.label = rng.bernoulli(0.5) ? 1 : 0;
  s.target = item();
  s.iu_id = static_cast<std::uint32_t>(1 + rng.below(v.ius));
  s.iu_type = static_cast<std::uint32_t>(1 + rng.below(3));
  s.iu_category = static_cast<std::uint32_t>(1 + rng.below(v.categories));
  s.stats_ctr = static_cast<std::uint32_t>(1 + rng.below(11));
  s.stats_impressions = static_cast<std::uint32_t>(1 + rng.below(16));
  s.cross_count = static_cast<std::uint32_t>(1 + rng.below(6));
  s.cross_recency = static_cast<std::uint32_t>(1 + rng.below(5));
  const std::size_t n_items = 1 + rng.below(20);
  for (std::size_t i = 0; i < n_items; ++i) s.item_seq.push_back(item());
  const std::size_t n_ius = 1 + rng.below(6);
  for (std::size_t i = 0; i < n_ius; ++i) {
    IuEntry e{static_cast<std::uint32_t>(1 + rng.below(v.ius)), static_cast<std::uint32_t>(1 + rng.below(3)),
              static_cast<std::uint32_t>(1 + rng.below(v.categories)), {}};
    const std::size_t inner = 1 + rng.below(5);
    for (std::size_t k = 0; k < inner; ++k) e.items.push_back(item());
    s.iu_seq.push_back(std::move(e));
  }
  return s;
}

Verdict c4_grad_check() {
  const auto t0 = Clock::now();
  const Vocab vocab{50, 400, 20, 40, 80};
  double worst = 0.0;
  std::string worst_name;
  int worst_seed = 0;
  std::size_t arrays = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    ModelConfig cfg;
    cfg.kind = ModelKind::kIuBoosted;
    cfg.seed = static_cast<std::uint64_t>(seed);
    // A zero output layer would make every upstream gradient vanish.
    cfg.zero_output_layer = false;
    cfg.embedding_init = 0.5;
    CtrModel model(cfg, vocab);
    const std::vector<TrainingSample> batch{random_sample(rng, vocab)};
    auto loss = [&](ParamStore&, bool with_grad) { return model.batch_loss(batch, with_grad); };
    const auto entries = grad_check(model.params(), loss, 1e-5);
    arrays = entries.size();
    for (const auto& e : entries) {
      if (e.max_relative_error > worst) {
        worst = e.max_relative_error;
        worst_name = e.name;
        worst_seed = seed;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("%zu arrays x %d seeds, max relative error %.3e (%s, seed %d), %.1fs", arrays, kSeeds, worst,
              worst_name.c_str(), worst_seed, secs)};
}

Verdict c5_attention() {
  double worst_sum = 0.0;
  double worst_perm = 0.0;
  bool singleton_exact = true;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(100 + seed));
    const std::size_t width = 32;
    const std::size_t dim = 24;
    Matrix wq(width, dim), wk(width, dim), wv(width, dim);
    for (Matrix* m : {&wq, &wk, &wv}) {
      for (double& x : m->data()) x = rng.normal(0.0, 0.5);
    }
    const AttentionParams params{&wq, &wk, &wv, 2};
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t rows = 1 + rng.below(30);
      std::vector<double> target(dim);
      for (double& x : target) x = rng.normal();
      Matrix history(rows, dim);
      for (double& x : history.data()) x = rng.normal();

      AttentionCache cache;
      const auto out = target_attention(target, history, params, &cache);
      for (std::size_t h = 0; h < cache.weights.rows(); ++h) {
        double sum = 0.0;
        for (double w : cache.weights.row(h)) sum += w;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      }

      std::vector<std::size_t> perm(rows);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(perm));
      Matrix shuffled(rows, dim);
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy(history.row(perm[r]).begin(), history.row(perm[r]).end(), shuffled.row(r).begin());
      }
      const auto out_perm = target_attention(target, shuffled, params);
      for (std::size_t i = 0; i < out.size(); ++i) worst_perm = std::max(worst_perm, std::abs(out[i] - out_perm[i]));

      Matrix single(1, dim);
      std::copy(history.row(0).begin(), history.row(0).end(), single.row(0).begin());
      const auto out_single = target_attention(target, single, params);
      const auto projected = project_history(single, params);
      for (std::size_t i = 0; i < out_single.size(); ++i) {
        singleton_exact = singleton_exact && out_single[i] == projected.values(0, i);
      }
    }
  }
  return {worst_sum <= 1e-12 && worst_perm <= 1e-12 && singleton_exact,
          fmt("max |sum w - 1| = %.1e, max permutation drift = %.1e, singleton exact: %s", worst_sum, worst_perm,
              singleton_exact ? "yes" : "no")};
}

Verdict c6_gsid() {
  const bool spaces = gsid_code_space(1) == 128 && gsid_code_space(2) == 16384 && gsid_code_space(3) == 2097152;
  bool monotone = true;
  int closer = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const PipelineConfig cfg = seeded_default(seed);
    const World world = generate_catalog(cfg.world, cfg.world_seed);
    const IuCatalog catalog = build_units(cfg, world);
    const auto& codes = catalog.item_codes();

    std::array<double, kGsidLevels + 1> mean{};
    for (const auto& item : world.items) {
      double sq = 0.0;
      for (double x : item.text) sq += x * x;
      mean[0] += std::sqrt(sq);
      const auto norms = gsid_residual_norms(item.text, catalog.codebooks());
      for (std::size_t l = 0; l < kGsidLevels; ++l) mean[l + 1] += norms[l];
    }
    for (std::size_t l = 1; l <= kGsidLevels; ++l) monotone = monotone && mean[l] <= mean[l - 1];

    auto dist = [&](const SynthItem& a, const SynthItem& b) {
      double sq = 0.0;
      for (std::size_t i = 0; i < a.text.size(); ++i) sq += (a.text[i] - b.text[i]) * (a.text[i] - b.text[i]);
      return std::sqrt(sq);
    };
    std::map<std::pair<std::uint16_t, std::uint16_t>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < world.items.size(); ++i) {
      const auto& c = codes[world.items[i].item_id];
      groups[{c.level[0], c.level[1]}].push_back(i);
    }
    double within = 0.0;
    double within_pairs = 0.0;
    for (const auto& [prefix, members] : groups) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          within += dist(world.items[members[a]], world.items[members[b]]);
          within_pairs += 1.0;
        }
      }
    }
    Rng rng(static_cast<std::uint64_t>(seed));
    double global = 0.0;
    const int n_pairs = 200000;
    for (int k = 0; k < n_pairs; ++k) {
      const std::size_t a = rng.below(world.items.size());
      std::size_t b = rng.below(world.items.size() - 1);
      if (b >= a) ++b;
      global += dist(world.items[a], world.items[b]);
    }
    within /= within_pairs;
    global /= n_pairs;
    closer += within < global ? 1 : 0;
    if (seed == 1) detail = fmt("seed 1: prefix-pair distance %.3f vs global %.3f", within, global);
  }
  return {spaces && monotone && closer == kSeeds,
          fmt("code spaces ok: %s, mean residual nonincreasing: %s, prefix groups tighter in %d/%d seeds (%s)",
              spaces ? "yes" : "no", monotone ? "yes" : "no", closer, kSeeds, detail.c_str())};
}

Verdict c7_stats_survive_deletion() {
  const SeedRun& run = seed_run(1);
  const World& world = run.synth->world;
  World pruned = world;
  const std::size_t before = pruned.items.size();
  std::erase_if(pruned.items, [](const SynthItem& item) { return item.sold; });
  const std::size_t removed = before - pruned.items.size();

  auto snapshots = [&](const World& w) {
    FeatureStore store(FeatureCatalog::from(w, *run.units), run.cfg.features);
    std::vector<IuStatsTable> tables;
    store.on_snapshot([&](int, const IuStatsTable& t) { tables.push_back(t); });
    featurize(run.log, store);
    tables.push_back(store.live_stats());
    return tables;
  };
  const auto full = snapshots(world);
  const auto after = snapshots(pruned);
  bool identical = full.size() == after.size();
  for (std::size_t d = 0; identical && d < full.size(); ++d) {
    identical = full[d].size() == after[d].size();
    for (std::size_t i = 0; identical && i < full[d].size(); ++i) {
      const IuStats& a = full[d][i];
      const IuStats& b = after[d][i];
      identical = a.iu_id == b.iu_id && a.impressions == b.impressions && a.clicks == b.clicks &&
                  a.inquiries == b.inquiries && a.transactions == b.transactions;
    }
  }
  return {identical && removed > 0,
          fmt("%zu sold items deleted, %zu daily tables compared: %s", removed, full.size(),
              identical ? "identical" : "DIFFERENT")};
}

Verdict c8_sequences() {
  const SeedRun& run = seed_run(1);
  const FeatureConfig& fc = run.cfg.features;
  const FeatureCatalog& catalog = run.store->catalog();
  std::map<std::uint32_t, std::vector<ClickRecord>> clicks;
  for (const auto& e : run.log) {
    if (e.kind == EventKind::kClick) clicks[e.user_id].push_back({e.timestamp_ms, e.item_id});
  }
  std::size_t length_violations = 0;
  std::size_t window_violations = 0;
  std::size_t inner_violations = 0;
  for (const auto& s : run.samples) {
    if (s.item_seq.size() > 150) ++length_violations;
    for (const auto& entry : s.iu_seq) inner_violations += entry.items.size() > 5 ? 1 : 0;
    // The clicks behind the sequence are the newest ones strictly before the sample.
    const auto& mine = clicks[s.user_id];
    auto end = std::lower_bound(mine.begin(), mine.end(), s.timestamp_ms,
                                [](const ClickRecord& c, std::int64_t t) { return c.timestamp_ms < t; });
    std::size_t k = 0;
    for (auto it = std::make_reverse_iterator(end); it != mine.rend() && k < s.item_seq.size(); ++it, ++k) {
      if (it->timestamp_ms < s.timestamp_ms - fc.window_ms) ++window_violations;
    }
  }

  // Time travel: rebuild sampled features from the log truncated just before
  // the sample time; any difference means a feature saw the future.
  std::size_t audited = 0;
  std::size_t leaks = 0;
  std::map<int, IuStatsTable> stats_at;
  std::map<int, UserIuCrossTable> cross_at;
  const StatsBucketizer& buckets = run.store->buckets();
  for (std::size_t i = 0; i < run.samples.size(); i += 23) {
    const auto& s = run.samples[i];
    const auto cut = std::lower_bound(run.log.begin(), run.log.end(), s.timestamp_ms,
                                      [](const InteractionEvent& e, std::int64_t t) { return e.timestamp_ms < t; });
    const std::span<const InteractionEvent> past(run.log.data(), static_cast<std::size_t>(cut - run.log.begin()));
    std::vector<ClickRecord> past_clicks;
    for (const auto& c : clicks[s.user_id]) {
      if (c.timestamp_ms < s.timestamp_ms) past_clicks.push_back(c);
    }
    const auto item_seq = build_item_sequence(past_clicks, s.timestamp_ms, catalog, fc);
    const auto iu_seq = group_by_iu(item_seq, catalog, fc.max_iu_seq, fc.max_inner);
    bool same = item_seq == s.item_seq && iu_seq == s.iu_seq;
    if (s.iu_id != 0) {
      auto& stats = stats_at[s.day];
      if (stats.empty()) stats = accumulate_iu_stats(past, catalog.item_iu, day_start(s.day), catalog.n_ius);
      if (!cross_at.contains(s.day)) cross_at[s.day] = accumulate_cross(past, catalog.item_iu, day_start(s.day));
      same = same && s.stats_impressions == StatsBucketizer::impression_bucket(stats[s.iu_id]) &&
             s.stats_ctr == buckets.ctr_bucket(stats[s.iu_id]) &&
             cross_features(s.user_id, s.iu_id, cross_at[s.day], s.timestamp_ms) ==
                 CrossFeatureIds{s.cross_count, s.cross_recency};
    }
    leaks += same ? 0 : 1;
    ++audited;
  }
  const bool ok = length_violations == 0 && window_violations == 0 && inner_violations == 0 && leaks == 0;
  return {ok, fmt("%zu samples: %zu over 150, %zu outside 30 days, %zu inner lists over 5; "
                  "time-travel audit of %zu samples found %zu leaks",
                  run.samples.size(), length_violations, window_violations, inner_violations, audited, leaks)};
}

Verdict c9_offline_ordering() {
  int ordered = 0;
  double gap = 0.0;
  double secs = 0.0;
  std::string per_seed;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const SeedRun& run = seed_run(seed);
    const double dnn = run.overall_auc.at(ModelKind::kDnn);
    const double din = run.overall_auc.at(ModelKind::kDin);
    const double iu = run.overall_auc.at(ModelKind::kIuBoosted);
    ordered += iu > din && din > dnn ? 1 : 0;
    gap += iu - din;
    secs += run.offline_seconds;
    per_seed += fmt(" %d:%.4f/%.4f/%.4f", seed, dnn, din, iu);
  }
  gap /= kSeeds;
  return {ordered >= 4 && gap >= 0.005 && secs < 900.0,
          fmt("IU_BOOSTED > DIN > DNN in %d/%d seeds, mean(IU - DIN) = %+.4f, %.0fs; DNN/DIN/IU:%s", ordered, kSeeds,
              gap, secs, per_seed.c_str())};
}

Verdict c10_serving_invariants() {
  const SeedRun& run = seed_run(1);
  const PipelineConfig& cfg = run.cfg;
  ServingState state = serving_state(cfg, run.synth->world, *run.units, run.log);
  const World before = state.world;
  std::size_t pages = 0;
  std::size_t not_subset = 0;
  const auto observer = [&](std::uint32_t, std::uint32_t iu_id, std::span<const RankedItem> shown) {
    ++pages;
    const auto& members = run.units->unit(iu_id).members;
    for (const auto& r : shown) {
      if (!std::binary_search(members.begin(), members.end(), r.item_id)) ++not_subset;
    }
  };
  const SimResult r = run_sessions(state, *run.units, *run.models.at(cfg.sim_model), cfg.sim,
                                   Rng::derive(cfg.sim_seed, 1), Rng::derive(cfg.sim_seed, 2), {}, observer);

  std::vector<std::uint32_t> stock(before.items.size() + 1, 0);
  for (const auto& item : before.items) stock[item.item_id] = item.sold ? 0 : item.stock;
  std::size_t sold_shown = 0;
  for (const auto& e : r.events) {
    if (e.kind == EventKind::kImpression && stock[e.item_id] == 0) ++sold_shown;
    if (e.kind == EventKind::kTransaction && stock[e.item_id] > 0) --stock[e.item_id];
  }
  SurfaceCounters sum;
  for (const auto& c : r.outcome.by_surface) sum += c;
  const SessionOutcome recount = count_outcome(r.events);
  const bool sums = r.outcome.overall() == sum && recount == r.outcome;
  return {sold_shown == 0 && not_subset == 0 && pages > 0 && sums,
          fmt("%zu sessions, %zu events: %zu sold impressions, %zu/%zu stage-two pages not subsets, "
              "Overall == sum of surfaces: %s",
              r.sessions, r.events.size(), sold_shown, not_subset, pages,
              sums ? "yes" : "no")};
}

Verdict c11_aa() {
  const SeedRun& run = seed_run(1);
  const PipelineConfig& cfg = run.cfg;
  const ServingState base = serving_state(cfg, run.synth->world, *run.units, run.log);
  AbConfig ab = cfg.ab;
  ab.mode = AbMode::kShared;
  const CtrModel& model = *run.models.at(ModelKind::kIuBoosted);
  const CtrModel copy = model;
  const AbReport r = run_ab_test(base, *run.units, model, copy, ab, cfg.sim, cfg.sim_seed);
  int zero = 0;
  for (const AbDelta& d : {r.overall, r.interest_unit, r.general_product}) {
    zero += (d.ctr_pct == 0.0) + (d.clicks_pct == 0.0) + (d.bills_pct == 0.0);
  }
  return {zero == 9, fmt("%d/9 delta cells exactly 0%%, %llu impressions per arm", zero,
                         static_cast<unsigned long long>(r.arm_a.overall().impressions))};
}

Verdict c12_ab() {
  int positive = 0;
  std::string per_seed;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const AbReport& r = *seed_run(seed).ab;
    positive += r.interest_unit.ctr_pct > 0.0 ? 1 : 0;
    per_seed += fmt(" %+.2f%%", r.interest_unit.ctr_pct);
  }
  return {positive >= 4,
          fmt("Interest Unit Rec dCTR (IU_BOOSTED vs DIN) positive in %d/%d seeds:%s", positive, kSeeds,
              per_seed.c_str())};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict c13_reproducible_cli() {
  const fs::path root = fs::temp_directory_path() / "iu4rec_acceptance_13";
  fs::remove_all(root);
  std::vector<std::string> reports;
  for (const char* run : {"a", "b"}) {
    const fs::path out = root / run;
    const std::string cmd = std::string("IU4REC_LOG=error \"") + IU4REC_CLI + "\" all --config \"" +
                            IU4REC_SOURCE_DIR + "/configs/small.json\" --seed 7 --out \"" + out.string() + "\"";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    reports.push_back(read_bytes(out / "report.json"));
    reports.push_back(read_bytes(out / "ab_report.json"));
  }
  const bool present = !reports[0].empty() && !reports[1].empty();
  const bool same_report = reports[0] == reports[2];
  const bool same_ab = reports[1] == reports[3];
  fs::remove_all(root);
  return {present && same_report && same_ab,
          fmt("two `all` runs (configs/small.json, seed 7): report.json %s, ab_report.json %s",
              same_report ? "identical" : "DIFFERENT", same_ab ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"RelaImpr arithmetic", c1_rela_impr},
      {"AUC vs brute force", c2_auc_brute_force},
      {"GAUC", c3_gauc},
      {"gradient check", c4_grad_check},
      {"attention properties", c5_attention},
      {"GSID codes", c6_gsid},
      {"IU stats survive deleting sold items", c7_stats_survive_deletion},
      {"sequence limits and time travel", c8_sequences},
      {"offline AUC ordering", c9_offline_ordering},
      {"serving invariants", c10_serving_invariants},
      {"A/A test", c11_aa},
      {"A/B test", c12_ab},
      {"reproducible reports", c13_reproducible_cli},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.contains(number)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
