#pragma once

// DNN, DIN and IU-Boosted CTR rankers over the numeric kernels.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "iu4rec/feature_store.hpp"
#include "iu4rec/numeric.hpp"

namespace iu4rec {

enum class ModelKind : std::uint8_t { kDnn = 0, kDin = 1, kIuBoosted = 2 };
inline constexpr std::array<ModelKind, 3> kAllModelKinds{ModelKind::kDnn, ModelKind::kDin,
                                                         ModelKind::kIuBoosted};

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

// Vocabulary sizes excluding the padding id.
struct Vocab {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t categories = 0;
  std::size_t brands = 0;
  std::size_t ius = 0;

  static Vocab from(const FeatureCatalog& catalog);
  bool operator==(const Vocab&) const = default;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kIuBoosted;
  std::size_t user_dim = 8;
  std::size_t item_id_dim = 16;
  std::size_t side_dim = 4;  // category, brand
  std::size_t iu_id_dim = 16;
  std::size_t iu_side_dim = 4;  // iu type, iu category
  std::size_t stats_dim = 8;
  std::size_t cross_dim = 8;
  std::size_t attention_width = 32;
  std::size_t attention_heads = 2;
  std::vector<std::size_t> hidden{64, 32, 16};
  double embedding_init = 0.05;  // sd of the embedding init
  bool zero_output_layer = true;
  std::uint64_t seed = 1;

  std::size_t item_width() const { return item_id_dim + 2 * side_dim; }
  std::size_t iu_width() const { return iu_id_dim + 2 * iu_side_dim + item_width(); }
  std::size_t mlp_input_width() const;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  double decay = 0.9999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean batch loss per step
  std::size_t steps = 0;
};

// −mean(y log p + (1−y) log(1−p)) with p clamped to [1e-7, 1−1e-7].
double nll_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels);

inline constexpr double kPredictionClamp = 1e-7;

class CtrModel {
 public:
  CtrModel(ModelConfig cfg, Vocab vocab);

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  ModelKind kind() const { return cfg_.kind; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  std::vector<double> embed_item(const ItemFeatures& item) const;
  std::vector<double> embed_iu_entry(const IuEntry& entry) const;
  // Target-side IU representation: the target's own unit with the user's
  // clicks in it as the inner block.
  std::vector<double> embed_target_iu(const TrainingSample& sample) const;

  // Throws DataError naming the first malformed field.
  void validate(const TrainingSample& sample) const;

  double logit(const TrainingSample& sample) const;
  double predict(const TrainingSample& sample) const;

  // Loss of one sample; with grad_scale != 0 adds grad_scale * dloss into
  // the parameter gradients.
  double forward_backward(const TrainingSample& sample, double grad_scale);

  // Mean loss over the samples; accumulates the gradient of that mean.
  double batch_loss(std::span<const TrainingSample> batch, bool with_grad);

 private:
  friend class SessionScorer;
  struct Forward;

  double run(const TrainingSample& sample, Forward* fwd) const;
  void backward(const TrainingSample& sample, const Forward& fwd, double grad_logit);
  AttentionParams item_attention() const;
  AttentionParams iu_attention() const;
  std::vector<DenseLayerRef> layers() const;

  ModelConfig cfg_;
  Vocab vocab_;
  ParamStore params_;
  struct Ids {
    std::size_t user, item, category, brand;
    std::size_t iu, iu_type, iu_category, stats_ctr, stats_imp, cross_count, cross_recency;
    std::size_t item_wq, item_wk, item_wv, iu_wq, iu_wk, iu_wv;
    std::vector<std::size_t> weights, biases;
  } ids_{};
};

TrainResult train(CtrModel& model, std::span<const TrainingSample> samples, const TrainConfig& cfg,
                  const std::function<void(std::size_t step, double loss)>& on_log = {});

// Scores many targets against one user context, reusing the projected
// histories. Candidates must carry the same sequences as the context.
class SessionScorer {
 public:
  SessionScorer(const CtrModel& model, const TrainingSample& context);
  double predict(const TrainingSample& candidate) const;

 private:
  const CtrModel* model_;
  std::vector<double> user_;
  std::vector<double> pooled_;
  std::optional<ProjectedHistory> items_;
  std::optional<ProjectedHistory> ius_;
};

}  // namespace iu4rec
