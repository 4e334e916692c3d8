#include "iu4rec/ctr_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "iu4rec/errors.hpp"
#include "iu4rec/rng.hpp"

namespace iu4rec {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDnn: return "DNN";
    case ModelKind::kDin: return "DIN";
    case ModelKind::kIuBoosted: return "IU_BOOSTED";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind k : kAllModelKinds) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(text) + "' (expected DNN, DIN or IU_BOOSTED)");
}

Vocab Vocab::from(const FeatureCatalog& catalog) {
  return {catalog.n_users, catalog.n_items, catalog.n_categories, catalog.n_brands, catalog.n_ius};
}

std::size_t ModelConfig::mlp_input_width() const {
  const std::size_t base = user_dim + item_width();
  switch (kind) {
    case ModelKind::kDnn: return base + item_width();
    case ModelKind::kDin: return base + attention_width;
    case ModelKind::kIuBoosted:
      return base + attention_width + iu_width() + 2 * stats_dim + 2 * cross_dim + attention_width;
  }
  return 0;
}

double nll_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels) {
  if (predictions.empty()) throw DataError("nll_loss: empty batch");
  if (predictions.size() != labels.size()) throw DataError("nll_loss: predictions/labels size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kPredictionClamp, 1.0 - kPredictionClamp);
    total += labels[i] != 0 ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------

namespace {

void init_normal(Matrix& m, Rng& rng, double sd, bool keep_row0) {
  for (std::size_t r = keep_row0 ? 1 : 0; r < m.rows(); ++r) {
    for (double& v : m.row(r)) v = rng.normal(0.0, sd);
  }
}

void init_uniform(Matrix& m, Rng& rng, double limit) {
  for (double& v : m.data()) v = rng.uniform(-limit, limit);
}

void add_into(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

CtrModel::CtrModel(ModelConfig cfg, Vocab vocab) : cfg_(std::move(cfg)), vocab_(vocab) {
  if (cfg_.attention_heads == 0 || cfg_.attention_width % cfg_.attention_heads != 0) {
    throw ConfigError("model: attention_heads must divide attention_width");
  }
  if (cfg_.hidden.empty()) throw ConfigError("model: need at least one hidden layer");
  Rng rng(Rng::derive(cfg_.seed, 0x6d6f64656cULL));
  const double sd = cfg_.embedding_init;
  auto table = [&](const char* name, std::size_t rows, std::size_t cols) {
    const std::size_t id = params_.add(name, rows + 1, cols, true);
    init_normal(params_[id].value, rng, sd, true);
    return id;
  };
  auto projection = [&](const std::string& name, std::size_t in) {
    const std::size_t id = params_.add(name, cfg_.attention_width, in, false);
    init_uniform(params_[id].value, rng, std::sqrt(6.0 / static_cast<double>(in + cfg_.attention_width)));
    return id;
  };
  ids_.user = table("user_emb", vocab_.users, cfg_.user_dim);
  ids_.item = table("item_emb", vocab_.items, cfg_.item_id_dim);
  ids_.category = table("category_emb", vocab_.categories, cfg_.side_dim);
  ids_.brand = table("brand_emb", vocab_.brands, cfg_.side_dim);
  if (cfg_.kind != ModelKind::kDnn) {
    ids_.item_wq = projection("item_attn.wq", cfg_.item_width());
    ids_.item_wk = projection("item_attn.wk", cfg_.item_width());
    ids_.item_wv = projection("item_attn.wv", cfg_.item_width());
  }
  if (cfg_.kind == ModelKind::kIuBoosted) {
    ids_.iu = table("iu_emb", vocab_.ius, cfg_.iu_id_dim);
    ids_.iu_type = table("iu_type_emb", 3, cfg_.iu_side_dim);
    ids_.iu_category = table("iu_category_emb", vocab_.categories, cfg_.iu_side_dim);
    ids_.stats_ctr = table("stats_ctr_emb", StatsBucketizer::kCtrVocab - 1, cfg_.stats_dim);
    ids_.stats_imp = table("stats_imp_emb", StatsBucketizer::kImpressionVocab - 1, cfg_.stats_dim);
    ids_.cross_count = table("cross_count_emb", kCountBucketVocab - 1, cfg_.cross_dim);
    ids_.cross_recency = table("cross_recency_emb", kRecencyBucketVocab - 1, cfg_.cross_dim);
    ids_.iu_wq = projection("iu_attn.wq", cfg_.iu_width());
    ids_.iu_wk = projection("iu_attn.wk", cfg_.iu_width());
    ids_.iu_wv = projection("iu_attn.wv", cfg_.iu_width());
  }
  std::size_t in = cfg_.mlp_input_width();
  std::vector<std::size_t> widths = cfg_.hidden;
  widths.push_back(1);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t out = widths[l];
    const std::size_t w = params_.add("mlp." + std::to_string(l) + ".w", out, in, false);
    const std::size_t b = params_.add("mlp." + std::to_string(l) + ".b", 1, out, false);
    const bool last = l + 1 == widths.size();
    if (!(last && cfg_.zero_output_layer)) {
      init_normal(params_[w].value, rng, std::sqrt(2.0 / static_cast<double>(in)), false);
    }
    ids_.weights.push_back(w);
    ids_.biases.push_back(b);
    in = out;
  }
  validate_mlp(cfg_.mlp_input_width(), layers());
}

AttentionParams CtrModel::item_attention() const {
  return {&params_[ids_.item_wq].value, &params_[ids_.item_wk].value, &params_[ids_.item_wv].value,
          cfg_.attention_heads};
}

AttentionParams CtrModel::iu_attention() const {
  return {&params_[ids_.iu_wq].value, &params_[ids_.iu_wk].value, &params_[ids_.iu_wv].value,
          cfg_.attention_heads};
}

std::vector<DenseLayerRef> CtrModel::layers() const {
  std::vector<DenseLayerRef> out;
  for (std::size_t l = 0; l < ids_.weights.size(); ++l) {
    const bool last = l + 1 == ids_.weights.size();
    out.push_back({&params_[ids_.weights[l]].value, &params_[ids_.biases[l]].value,
                   last ? Activation::kIdentity : Activation::kRelu});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding assembly

namespace {

void copy_into(std::span<double> dst, std::span<const double> src) { std::copy(src.begin(), src.end(), dst.begin()); }

}  // namespace

std::vector<double> CtrModel::embed_item(const ItemFeatures& item) const {
  std::vector<double> out(cfg_.item_width(), 0.0);
  std::span<double> o(out);
  copy_into(o.subspan(0, cfg_.item_id_dim), params_[ids_.item].lookup(item.item_id));
  copy_into(o.subspan(cfg_.item_id_dim, cfg_.side_dim), params_[ids_.category].lookup(item.category));
  copy_into(o.subspan(cfg_.item_id_dim + cfg_.side_dim, cfg_.side_dim), params_[ids_.brand].lookup(item.brand));
  return out;
}

namespace {

std::size_t real_items(std::span<const ItemFeatures> items) {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const ItemFeatures& f) { return f.item_id != 0; }));
}

}  // namespace

std::vector<double> CtrModel::embed_iu_entry(const IuEntry& entry) const {
  if (cfg_.kind != ModelKind::kIuBoosted) throw ConfigError("embed_iu_entry: model has no IU tables");
  std::vector<double> out(cfg_.iu_width(), 0.0);
  std::span<double> o(out);
  std::size_t at = 0;
  copy_into(o.subspan(at, cfg_.iu_id_dim), params_[ids_.iu].lookup(entry.iu_id));
  at += cfg_.iu_id_dim;
  copy_into(o.subspan(at, cfg_.iu_side_dim), params_[ids_.iu_type].lookup(entry.iu_type));
  at += cfg_.iu_side_dim;
  copy_into(o.subspan(at, cfg_.iu_side_dim), params_[ids_.iu_category].lookup(entry.category));
  at += cfg_.iu_side_dim;
  const std::size_t n = real_items(entry.items);
  if (n > 0) {
    auto inner = o.subspan(at, cfg_.item_width());
    for (const auto& item : entry.items) {
      if (item.item_id == 0) continue;
      add_into(inner, embed_item(item), 1.0 / static_cast<double>(n));
    }
  }
  return out;
}

namespace {

const IuEntry* find_entry(const HierIuClickSequence& seq, std::uint32_t iu_id) {
  if (iu_id == 0) return nullptr;
  for (const auto& e : seq) {
    if (e.iu_id == iu_id) return &e;
  }
  return nullptr;
}

}  // namespace

std::vector<double> CtrModel::embed_target_iu(const TrainingSample& s) const {
  IuEntry entry{s.iu_id, s.iu_type, s.iu_category, {}};
  if (const IuEntry* own = find_entry(s.iu_seq, s.iu_id)) entry.items = own->items;
  return embed_iu_entry(entry);
}

void CtrModel::validate(const TrainingSample& s) const {
  auto check = [](const char* field, std::size_t id, std::size_t vocab) {
    if (id > vocab) {
      throw DataError(std::string("sample field '") + field + "': id " + std::to_string(id) +
                      " out of vocabulary (max " + std::to_string(vocab) + ")");
    }
  };
  if (s.label > 1) throw DataError("sample field 'label': must be 0 or 1");
  check("user_id", s.user_id, vocab_.users);
  auto check_item = [&](const ItemFeatures& f, const char* where) {
    check(where, f.item_id, vocab_.items);
    check("category", f.category, vocab_.categories);
    check("brand", f.brand, vocab_.brands);
  };
  if (s.target.item_id == 0) throw DataError("sample field 'target.item_id': padding id");
  check_item(s.target, "target.item_id");
  if (s.item_seq.size() > 150) throw DataError("sample field 'item_seq': longer than 150");
  for (const auto& f : s.item_seq) check_item(f, "item_seq.item_id");
  if (cfg_.kind != ModelKind::kIuBoosted) return;
  check("iu_id", s.iu_id, vocab_.ius);
  check("iu_type", s.iu_type, 3);
  check("iu_category", s.iu_category, vocab_.categories);
  check("stats_ctr", s.stats_ctr, StatsBucketizer::kCtrVocab - 1);
  check("stats_impressions", s.stats_impressions, StatsBucketizer::kImpressionVocab - 1);
  check("cross_count", s.cross_count, kCountBucketVocab - 1);
  check("cross_recency", s.cross_recency, kRecencyBucketVocab - 1);
  for (const auto& e : s.iu_seq) {
    check("iu_seq.iu_id", e.iu_id, vocab_.ius);
    check("iu_seq.iu_type", e.iu_type, 3);
    check("iu_seq.category", e.category, vocab_.categories);
    if (e.items.size() > 5) throw DataError("sample field 'iu_seq.items': longer than 5");
    for (const auto& f : e.items) check_item(f, "iu_seq.items.item_id");
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

struct CtrModel::Forward {
  std::vector<double> x;
  MlpCache mlp;
  std::vector<const ItemFeatures*> item_rows;
  AttentionCache item_cache;
  std::vector<const IuEntry*> iu_rows;
  AttentionCache iu_cache;
  IuEntry target_iu;
};

namespace {

Matrix zero_history(std::size_t cols) { return Matrix(1, cols, 0.0); }

}  // namespace

double CtrModel::run(const TrainingSample& s, Forward* fwd) const {
  const std::size_t iw = cfg_.item_width();
  std::vector<double> x(cfg_.mlp_input_width(), 0.0);
  std::span<double> xs(x);
  std::size_t at = 0;
  copy_into(xs.subspan(at, cfg_.user_dim), params_[ids_.user].lookup(s.user_id));
  at += cfg_.user_dim;
  const std::vector<double> target = embed_item(s.target);
  copy_into(xs.subspan(at, iw), target);
  at += iw;

  std::vector<const ItemFeatures*> rows;
  for (const auto& f : s.item_seq) {
    if (f.item_id != 0) rows.push_back(&f);
  }
  if (cfg_.kind == ModelKind::kDnn) {
    auto pooled = xs.subspan(at, iw);
    for (const ItemFeatures* f : rows) add_into(pooled, embed_item(*f), 1.0 / static_cast<double>(rows.size()));
    at += iw;
  } else {
    Matrix hist = rows.empty() ? zero_history(iw) : Matrix(rows.size(), iw);
    for (std::size_t r = 0; r < rows.size(); ++r) copy_into(hist.row(r), embed_item(*rows[r]));
    const auto att = target_attention(target, hist, item_attention(), fwd ? &fwd->item_cache : nullptr);
    copy_into(xs.subspan(at, cfg_.attention_width), att);
    at += cfg_.attention_width;
  }

  if (cfg_.kind == ModelKind::kIuBoosted) {
    IuEntry tiu{s.iu_id, s.iu_type, s.iu_category, {}};
    if (const IuEntry* own = find_entry(s.iu_seq, s.iu_id)) tiu.items = own->items;
    const std::vector<double> query = embed_iu_entry(tiu);
    copy_into(xs.subspan(at, query.size()), query);
    at += query.size();
    copy_into(xs.subspan(at, cfg_.stats_dim), params_[ids_.stats_ctr].lookup(s.stats_ctr));
    at += cfg_.stats_dim;
    copy_into(xs.subspan(at, cfg_.stats_dim), params_[ids_.stats_imp].lookup(s.stats_impressions));
    at += cfg_.stats_dim;
    copy_into(xs.subspan(at, cfg_.cross_dim), params_[ids_.cross_count].lookup(s.cross_count));
    at += cfg_.cross_dim;
    copy_into(xs.subspan(at, cfg_.cross_dim), params_[ids_.cross_recency].lookup(s.cross_recency));
    at += cfg_.cross_dim;

    std::vector<const IuEntry*> entries;
    for (const auto& e : s.iu_seq) {
      if (e.iu_id != 0) entries.push_back(&e);
    }
    const std::size_t uw = cfg_.iu_width();
    Matrix hist = entries.empty() ? zero_history(uw) : Matrix(entries.size(), uw);
    for (std::size_t r = 0; r < entries.size(); ++r) copy_into(hist.row(r), embed_iu_entry(*entries[r]));
    const auto att = target_attention(query, hist, iu_attention(), fwd ? &fwd->iu_cache : nullptr);
    copy_into(xs.subspan(at, cfg_.attention_width), att);
    at += cfg_.attention_width;
    if (fwd) {
      fwd->iu_rows = std::move(entries);
      fwd->target_iu = std::move(tiu);
    }
  }

  const auto refs = layers();
  const double z = mlp_forward(x, refs, fwd ? &fwd->mlp : nullptr);
  if (fwd) {
    fwd->x = std::move(x);
    fwd->item_rows = std::move(rows);
  }
  return z;
}

double CtrModel::logit(const TrainingSample& s) const {
  validate(s);
  return run(s, nullptr);
}

double CtrModel::predict(const TrainingSample& s) const { return sigmoid(logit(s)); }

namespace {

struct ItemGradSink {
  Param* item;
  Param* category;
  Param* brand;
  std::size_t id_dim;
  std::size_t side_dim;

  void add(const ItemFeatures& f, std::span<const double> g, double scale) {
    if (auto r = item->grad_row(f.item_id); !r.empty()) add_into(r, g.subspan(0, id_dim), scale);
    if (auto r = category->grad_row(f.category); !r.empty()) add_into(r, g.subspan(id_dim, side_dim), scale);
    if (auto r = brand->grad_row(f.brand); !r.empty()) add_into(r, g.subspan(id_dim + side_dim, side_dim), scale);
  }
};

}  // namespace

void CtrModel::backward(const TrainingSample& s, const Forward& fwd, double grad_logit) {
  const std::size_t iw = cfg_.item_width();
  const auto refs = layers();
  std::vector<DenseLayerGrads> grads;
  for (std::size_t l = 0; l < ids_.weights.size(); ++l) {
    grads.push_back({&params_[ids_.weights[l]].grad, &params_[ids_.biases[l]].grad});
  }
  std::vector<double> gx(fwd.x.size(), 0.0);
  mlp_backward(fwd.mlp, refs, grad_logit, grads, gx);
  std::span<const double> g(gx);

  ItemGradSink items{&params_[ids_.item], &params_[ids_.category], &params_[ids_.brand], cfg_.item_id_dim,
                     cfg_.side_dim};
  std::size_t at = 0;
  if (auto r = params_[ids_.user].grad_row(s.user_id); !r.empty()) add_into(r, g.subspan(at, cfg_.user_dim));
  at += cfg_.user_dim;
  std::vector<double> g_target(g.begin() + static_cast<std::ptrdiff_t>(at),
                               g.begin() + static_cast<std::ptrdiff_t>(at + iw));
  at += iw;

  if (cfg_.kind == ModelKind::kDnn) {
    const auto gp = g.subspan(at, iw);
    for (const ItemFeatures* f : fwd.item_rows) items.add(*f, gp, 1.0 / static_cast<double>(fwd.item_rows.size()));
    at += iw;
  } else {
    Matrix g_hist(fwd.item_cache.history.rows(), iw);
    AttentionGrads ag{&params_[ids_.item_wq].grad, &params_[ids_.item_wk].grad, &params_[ids_.item_wv].grad};
    target_attention_backward(fwd.item_cache, item_attention(), g.subspan(at, cfg_.attention_width), ag, g_target,
                              &g_hist);
    for (std::size_t r = 0; r < fwd.item_rows.size(); ++r) items.add(*fwd.item_rows[r], g_hist.row(r), 1.0);
    at += cfg_.attention_width;
  }
  items.add(s.target, g_target, 1.0);

  if (cfg_.kind != ModelKind::kIuBoosted) return;

  const std::size_t uw = cfg_.iu_width();
  auto iu_sink = [&](const IuEntry& e, std::span<const double> ge) {
    std::size_t k = 0;
    if (auto r = params_[ids_.iu].grad_row(e.iu_id); !r.empty()) add_into(r, ge.subspan(k, cfg_.iu_id_dim));
    k += cfg_.iu_id_dim;
    if (auto r = params_[ids_.iu_type].grad_row(e.iu_type); !r.empty()) add_into(r, ge.subspan(k, cfg_.iu_side_dim));
    k += cfg_.iu_side_dim;
    if (auto r = params_[ids_.iu_category].grad_row(e.category); !r.empty()) {
      add_into(r, ge.subspan(k, cfg_.iu_side_dim));
    }
    k += cfg_.iu_side_dim;
    const std::size_t n = real_items(e.items);
    for (const auto& f : e.items) {
      if (f.item_id != 0) items.add(f, ge.subspan(k, iw), 1.0 / static_cast<double>(n));
    }
  };

  std::vector<double> g_query(g.begin() + static_cast<std::ptrdiff_t>(at),
                              g.begin() + static_cast<std::ptrdiff_t>(at + uw));
  at += uw;
  auto bucket = [&](std::size_t param, std::uint32_t id, std::size_t width) {
    if (auto r = params_[param].grad_row(id); !r.empty()) add_into(r, g.subspan(at, width));
    at += width;
  };
  bucket(ids_.stats_ctr, s.stats_ctr, cfg_.stats_dim);
  bucket(ids_.stats_imp, s.stats_impressions, cfg_.stats_dim);
  bucket(ids_.cross_count, s.cross_count, cfg_.cross_dim);
  bucket(ids_.cross_recency, s.cross_recency, cfg_.cross_dim);

  Matrix g_hist(fwd.iu_cache.history.rows(), uw);
  AttentionGrads ag{&params_[ids_.iu_wq].grad, &params_[ids_.iu_wk].grad, &params_[ids_.iu_wv].grad};
  target_attention_backward(fwd.iu_cache, iu_attention(), g.subspan(at, cfg_.attention_width), ag, g_query,
                            &g_hist);
  for (std::size_t r = 0; r < fwd.iu_rows.size(); ++r) iu_sink(*fwd.iu_rows[r], g_hist.row(r));
  iu_sink(fwd.target_iu, g_query);
}

double CtrModel::forward_backward(const TrainingSample& s, double grad_scale) {
  validate(s);
  Forward fwd;
  const double z = run(s, grad_scale != 0.0 ? &fwd : nullptr);
  const double p = sigmoid(z);
  const double pc = std::clamp(p, kPredictionClamp, 1.0 - kPredictionClamp);
  const double loss = s.label != 0 ? -std::log(pc) : -std::log(1.0 - pc);
  if (grad_scale != 0.0) {
    // The clamp is flat outside its range.
    const double dz = (p == pc) ? p - static_cast<double>(s.label) : 0.0;
    backward(s, fwd, grad_scale * dz);
  }
  return loss;
}

double CtrModel::batch_loss(std::span<const TrainingSample> batch, bool with_grad) {
  if (batch.empty()) throw DataError("batch_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& s : batch) total += forward_backward(s, with_grad ? scale : 0.0);
  return total * scale;
}

// ---------------------------------------------------------------------------

TrainResult train(CtrModel& model, std::span<const TrainingSample> samples, const TrainConfig& cfg,
                  const std::function<void(std::size_t, double)>& on_log) {
  if (samples.empty()) throw DataError("train: empty dataset");
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  const AdagradConfig opt{cfg.learning_rate, cfg.decay, cfg.epsilon};
  Rng rng(Rng::derive(cfg.seed, 0x747261696eULL));
  std::vector<std::size_t> order(samples.size());
  TrainResult result;
  ParamStore& store = model.params();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      store.zero_grad();
      const double scale = 1.0 / static_cast<double>(end - start);
      double total = 0.0;
      auto diverged = [&](const std::string& what) {
        return TrainingDiverged("training diverged at step " + std::to_string(result.steps) + " (epoch " +
                                std::to_string(epoch + 1) + "): " + what + "; lower the learning rate");
      };
      try {
        for (std::size_t i = start; i < end; ++i) total += model.forward_backward(samples[order[i]], scale);
      } catch (const KernelError& e) {
        throw diverged(e.what());
      }
      const double loss = total * scale;
      if (!std::isfinite(loss)) throw diverged("batch loss is " + std::to_string(loss));
      adagrad_step(store, opt);
      result.loss_curve.push_back(loss);
      ++result.steps;
      if (on_log && cfg.log_every > 0 && result.steps % cfg.log_every == 0) on_log(result.steps, loss);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

SessionScorer::SessionScorer(const CtrModel& model, const TrainingSample& context) : model_(&model) {
  const ModelConfig& cfg = model.config();
  const std::size_t iw = cfg.item_width();
  const auto user = model.params()[model.ids_.user].lookup(context.user_id);
  user_.assign(user.begin(), user.end());
  std::vector<const ItemFeatures*> rows;
  for (const auto& f : context.item_seq) {
    if (f.item_id != 0) rows.push_back(&f);
  }
  if (cfg.kind == ModelKind::kDnn) {
    pooled_.assign(iw, 0.0);
    for (const ItemFeatures* f : rows) add_into(pooled_, model.embed_item(*f), 1.0 / static_cast<double>(rows.size()));
  } else {
    Matrix hist = rows.empty() ? zero_history(iw) : Matrix(rows.size(), iw);
    for (std::size_t r = 0; r < rows.size(); ++r) copy_into(hist.row(r), model.embed_item(*rows[r]));
    items_ = project_history(hist, model.item_attention());
  }
  if (cfg.kind == ModelKind::kIuBoosted) {
    std::vector<const IuEntry*> entries;
    for (const auto& e : context.iu_seq) {
      if (e.iu_id != 0) entries.push_back(&e);
    }
    const std::size_t uw = cfg.iu_width();
    Matrix hist = entries.empty() ? zero_history(uw) : Matrix(entries.size(), uw);
    for (std::size_t r = 0; r < entries.size(); ++r) copy_into(hist.row(r), model.embed_iu_entry(*entries[r]));
    ius_ = project_history(hist, model.iu_attention());
  }
}

double SessionScorer::predict(const TrainingSample& s) const {
  const CtrModel& m = *model_;
  const ModelConfig& cfg = m.config();
  const std::size_t iw = cfg.item_width();
  std::vector<double> x(cfg.mlp_input_width(), 0.0);
  std::span<double> xs(x);
  std::size_t at = 0;
  copy_into(xs.subspan(at, cfg.user_dim), user_);
  at += cfg.user_dim;
  const std::vector<double> target = m.embed_item(s.target);
  copy_into(xs.subspan(at, iw), target);
  at += iw;
  if (cfg.kind == ModelKind::kDnn) {
    copy_into(xs.subspan(at, iw), pooled_);
    at += iw;
  } else {
    const AttentionParams ap = m.item_attention();
    std::vector<double> query(ap.width());
    matvec(*ap.wq, target, query);
    copy_into(xs.subspan(at, cfg.attention_width), attend(query, *items_, ap.heads));
    at += cfg.attention_width;
  }
  if (cfg.kind == ModelKind::kIuBoosted) {
    const auto& p = m.params();
    const std::vector<double> tiu = m.embed_target_iu(s);
    copy_into(xs.subspan(at, tiu.size()), tiu);
    at += tiu.size();
    copy_into(xs.subspan(at, cfg.stats_dim), p[m.ids_.stats_ctr].lookup(s.stats_ctr));
    at += cfg.stats_dim;
    copy_into(xs.subspan(at, cfg.stats_dim), p[m.ids_.stats_imp].lookup(s.stats_impressions));
    at += cfg.stats_dim;
    copy_into(xs.subspan(at, cfg.cross_dim), p[m.ids_.cross_count].lookup(s.cross_count));
    at += cfg.cross_dim;
    copy_into(xs.subspan(at, cfg.cross_dim), p[m.ids_.cross_recency].lookup(s.cross_recency));
    at += cfg.cross_dim;
    const AttentionParams ap = m.iu_attention();
    std::vector<double> query(ap.width());
    matvec(*ap.wq, tiu, query);
    copy_into(xs.subspan(at, cfg.attention_width), attend(query, *ius_, ap.heads));
    at += cfg.attention_width;
  }
  return sigmoid(mlp_forward(x, m.layers()));
}

}  // namespace iu4rec
