// Microbenchmarks for the hot paths: attention, MLP, AUC, k-means and a
// full training step on a small synthetic log.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "iu4rec/config.hpp"
#include "iu4rec/ctr_model.hpp"
#include "iu4rec/iu_construction.hpp"
#include "iu4rec/metrics.hpp"
#include "iu4rec/numeric.hpp"
#include "iu4rec/pipeline.hpp"

using namespace iu4rec;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 0.3);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = n(gen);
  return m;
}

void BM_TargetAttention(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  const Matrix wq = random_matrix(32, 24, gen), wk = random_matrix(32, 24, gen),
               wv = random_matrix(32, 24, gen);
  const AttentionParams params{&wq, &wk, &wv, 2};
  const Matrix history = random_matrix(rows, 24, gen);
  const Matrix target = random_matrix(1, 24, gen);
  for (auto _ : state) {
    auto out = target_attention(target.row(0), history, params);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}
BENCHMARK(BM_TargetAttention)->Arg(5)->Arg(50)->Arg(150);

void BM_MlpForwardBackward(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const std::vector<std::size_t> widths{176, 64, 32, 16, 1};
  std::vector<Matrix> w, b, gw, gb;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    w.push_back(random_matrix(widths[i + 1], widths[i], gen));
    b.push_back(Matrix(1, widths[i + 1]));
    gw.push_back(Matrix(widths[i + 1], widths[i]));
    gb.push_back(Matrix(1, widths[i + 1]));
  }
  std::vector<DenseLayerRef> layers;
  std::vector<DenseLayerGrads> grads;
  for (std::size_t i = 0; i < w.size(); ++i) {
    layers.push_back({&w[i], &b[i], i + 1 == w.size() ? Activation::kIdentity : Activation::kRelu});
    grads.push_back({&gw[i], &gb[i]});
  }
  const Matrix x = random_matrix(1, widths.front(), gen);
  std::vector<double> gx(widths.front());
  for (auto _ : state) {
    MlpCache cache;
    const double out = mlp_forward(x.row(0), layers, &cache);
    mlp_backward(cache, layers, out, grads, gx);
    benchmark::DoNotOptimize(gx.data());
  }
}
BENCHMARK(BM_MlpForwardBackward);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = u(gen);
    labels[i] = u(gen) < 0.3 ? 1 : 0;
  }
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

void BM_KMeans(benchmark::State& state) {
  std::mt19937_64 gen(4);
  const Matrix data = random_matrix(static_cast<std::size_t>(state.range(0)), 16, gen);
  for (auto _ : state) {
    auto result = kmeans(data, 32, 5, 20);
    benchmark::DoNotOptimize(result.assignment.data());
  }
}
BENCHMARK(BM_KMeans)->Arg(2000)->Unit(benchmark::kMillisecond);

// One Adagrad step over a 256-sample batch drawn from a small synthetic log.
void BM_TrainStep(benchmark::State& state) {
  const auto kind = static_cast<ModelKind>(state.range(0));
  PipelineConfig cfg;
  cfg.world.n_users = 120;
  cfg.world.n_items = 1500;
  cfg.world.n_true_units = 40;
  cfg.world.n_categories = 6;
  cfg.world.listing_days = 4;
  cfg.log_days = 2;
  cfg.iu.image_clusters = 40;
  const SynthOutput synth = synthesize(cfg);
  const IuCatalog units = build_units(cfg, synth.world);
  FeatureStore store = make_feature_store(cfg, synth.world, units);
  std::vector<TrainingSample> samples = featurize(synth.events, store);
  if (samples.size() > 256) samples.resize(256);
  ModelConfig mc = cfg.model;
  mc.kind = kind;
  CtrModel model(mc, Vocab::from(store.catalog()));
  TrainConfig tc = cfg.train;
  tc.batch_size = samples.size();
  for (auto _ : state) {
    const auto result = train(model, samples, tc);
    benchmark::DoNotOptimize(result.steps);
  }
  state.SetLabel(std::string(to_string(kind)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(ModelKind::kDnn))
    ->Arg(static_cast<int>(ModelKind::kDin))
    ->Arg(static_cast<int>(ModelKind::kIuBoosted))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
