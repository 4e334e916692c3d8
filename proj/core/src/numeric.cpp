#include "iu4rec/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "iu4rec/errors.hpp"

namespace iu4rec {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  Matrix out(n, m);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m) throw KernelError("Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), out.row(r).begin());
    ++r;
  }
  return out;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Matrix::resize(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

void matvec(const Matrix& w, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void matvec_transpose_add(const Matrix& w, std::span<const double> gy, std::span<double> gx) {
  const std::size_t cols = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = gy[r];
    if (g == 0.0) continue;
    const double* wr = w.row(r).data();
    for (std::size_t c = 0; c < cols; ++c) gx[c] += g * wr[c];
  }
}

void outer_add(std::span<const double> a, std::span<const double> b, Matrix& g) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* gr = g.row(r).data();
    for (std::size_t c = 0; c < b.size(); ++c) gr[c] += ar * b[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void softmax_inplace(std::span<double> values) {
  if (values.empty()) return;
  const double max = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - max);
    total += v;
  }
  for (double& v : values) v /= total;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw KernelError("softmax_rows: non-finite value in row " + std::to_string(r));
      }
    }
    softmax_inplace(row);
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------

void validate_attention(const AttentionParams& params, std::size_t target_dim,
                        std::size_t history_dim) {
  if (params.wq == nullptr || params.wk == nullptr || params.wv == nullptr) {
    throw ConfigError("attention: missing projection");
  }
  const std::size_t width = params.wq->rows();
  if (params.heads == 0 || width % params.heads != 0) {
    throw ConfigError("attention: head count " + std::to_string(params.heads) +
                      " does not divide projection width " + std::to_string(width));
  }
  if (params.wk->rows() != width || params.wv->rows() != width) {
    throw ConfigError("attention: projection widths differ");
  }
  if (params.wq->cols() != target_dim) {
    throw ConfigError("attention: query projection expects " + std::to_string(params.wq->cols()) +
                      " inputs, got " + std::to_string(target_dim));
  }
  if (params.wk->cols() != history_dim || params.wv->cols() != history_dim) {
    throw ConfigError("attention: key/value projection expects " +
                      std::to_string(params.wk->cols()) + " inputs, got " +
                      std::to_string(history_dim));
  }
}

ProjectedHistory project_history(const Matrix& history, const AttentionParams& params) {
  const std::size_t width = params.width();
  ProjectedHistory out{Matrix(history.rows(), width), Matrix(history.rows(), width)};
  for (std::size_t i = 0; i < history.rows(); ++i) {
    matvec(*params.wk, history.row(i), out.keys.row(i));
    matvec(*params.wv, history.row(i), out.values.row(i));
  }
  return out;
}

std::vector<double> attend(std::span<const double> query, const ProjectedHistory& projected,
                           std::size_t heads, Matrix* weights_out) {
  const std::size_t n = projected.keys.rows();
  const std::size_t width = projected.keys.cols();
  if (n == 0) throw KernelError("attention: empty history (pad with a padding row)");
  const std::size_t hw = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hw));
  std::vector<double> out(width, 0.0);
  std::vector<double> logits(n);
  if (weights_out != nullptr) weights_out->resize(heads, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * hw;
    for (std::size_t i = 0; i < n; ++i) {
      const double* k = projected.keys.row(i).data() + off;
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += query[off + j] * k[j];
      logits[i] = acc * scale;
    }
    softmax_inplace(logits);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = logits[i];
      const double* v = projected.values.row(i).data() + off;
      for (std::size_t j = 0; j < hw; ++j) out[off + j] += a * v[j];
      if (weights_out != nullptr) (*weights_out)(h, i) = a;
    }
  }
  for (std::size_t j = 0; j < width; ++j) {
    if (!std::isfinite(out[j])) throw KernelError("attention: non-finite output");
  }
  return out;
}

std::vector<double> target_attention(std::span<const double> target, const Matrix& history,
                                     const AttentionParams& params, AttentionCache* cache) {
  validate_attention(params, target.size(), history.cols());
  if (history.rows() == 0) throw KernelError("attention: empty history (pad with a padding row)");
  std::vector<double> query(params.width());
  matvec(*params.wq, target, query);
  ProjectedHistory projected = project_history(history, params);
  if (cache == nullptr) return attend(query, projected, params.heads, nullptr);
  auto out = attend(query, projected, params.heads, &cache->weights);
  cache->target.assign(target.begin(), target.end());
  cache->history = history;
  cache->query = std::move(query);
  cache->projected = std::move(projected);
  return out;
}

void target_attention_backward(const AttentionCache& cache, const AttentionParams& params,
                               std::span<const double> grad_out, const AttentionGrads& grads,
                               std::span<double> grad_target, Matrix* grad_history) {
  const std::size_t n = cache.history.rows();
  const std::size_t width = params.width();
  const std::size_t hw = params.head_width();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hw));
  const Matrix& keys = cache.projected.keys;
  const Matrix& values = cache.projected.values;

  std::vector<double> grad_query(width, 0.0);
  Matrix grad_keys(n, width);
  Matrix grad_values(n, width);
  std::vector<double> grad_weight(n);
  for (std::size_t h = 0; h < params.heads; ++h) {
    const std::size_t off = h * hw;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = cache.weights(h, i);
      const double* v = values.row(i).data() + off;
      double* gv = grad_values.row(i).data() + off;
      double ga = 0.0;
      for (std::size_t j = 0; j < hw; ++j) {
        gv[j] += a * grad_out[off + j];
        ga += grad_out[off + j] * v[j];
      }
      grad_weight[i] = ga;
      weighted += a * ga;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double gs = cache.weights(h, i) * (grad_weight[i] - weighted) * scale;
      if (gs == 0.0) continue;
      const double* k = keys.row(i).data() + off;
      double* gk = grad_keys.row(i).data() + off;
      for (std::size_t j = 0; j < hw; ++j) {
        grad_query[off + j] += gs * k[j];
        gk[j] += gs * cache.query[off + j];
      }
    }
  }

  outer_add(grad_query, cache.target, *grads.wq);
  matvec_transpose_add(*params.wq, grad_query, grad_target);
  for (std::size_t i = 0; i < n; ++i) {
    outer_add(grad_keys.row(i), cache.history.row(i), *grads.wk);
    outer_add(grad_values.row(i), cache.history.row(i), *grads.wv);
    if (grad_history != nullptr) {
      matvec_transpose_add(*params.wk, grad_keys.row(i), grad_history->row(i));
      matvec_transpose_add(*params.wv, grad_values.row(i), grad_history->row(i));
    }
  }
}

Matrix attention_logits(std::span<const double> target, const Matrix& history,
                        const AttentionParams& params) {
  validate_attention(params, target.size(), history.cols());
  std::vector<double> query(params.width());
  matvec(*params.wq, target, query);
  const ProjectedHistory projected = project_history(history, params);
  const std::size_t hw = params.head_width();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hw));
  Matrix logits(params.heads, history.rows());
  for (std::size_t h = 0; h < params.heads; ++h) {
    for (std::size_t i = 0; i < history.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) {
        acc += query[h * hw + j] * projected.keys(i, h * hw + j);
      }
      logits(h, i) = acc * scale;
    }
  }
  return logits;
}

// ---------------------------------------------------------------------------

void validate_mlp(std::size_t input_dim, std::span<const DenseLayerRef> layers) {
  if (layers.empty()) throw ConfigError("mlp: no layers");
  std::size_t width = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix& w = *layers[l].weight;
    const Matrix& b = *layers[l].bias;
    if (w.cols() != width) {
      throw ConfigError("mlp: layer " + std::to_string(l) + " expects " +
                        std::to_string(w.cols()) + " inputs, got " + std::to_string(width));
    }
    if (b.size() != w.rows()) {
      throw ConfigError("mlp: layer " + std::to_string(l) + " bias width mismatch");
    }
    width = w.rows();
  }
  if (width != 1) throw ConfigError("mlp: final layer width must be 1");
}

double mlp_forward(std::span<const double> x, std::span<const DenseLayerRef> layers,
                   MlpCache* cache) {
  validate_mlp(x.size(), layers);
  std::vector<double> current(x.begin(), x.end());
  if (cache != nullptr) {
    cache->inputs.resize(layers.size());
    cache->outputs.resize(layers.size());
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix& w = *layers[l].weight;
    std::vector<double> next(w.rows());
    matvec(w, current, next);
    const auto bias = layers[l].bias->data();
    for (std::size_t j = 0; j < next.size(); ++j) {
      next[j] += bias[j];
      if (layers[l].activation == Activation::kRelu && next[j] < 0.0) next[j] = 0.0;
    }
    if (cache != nullptr) {
      cache->inputs[l] = std::move(current);
      cache->outputs[l] = next;
    }
    current = std::move(next);
  }
  const double logit = current[0];
  if (!std::isfinite(logit)) throw KernelError("mlp: non-finite logit");
  return logit;
}

void mlp_backward(const MlpCache& cache, std::span<const DenseLayerRef> layers, double grad_logit,
                  std::span<const DenseLayerGrads> grads, std::span<double> grad_x) {
  std::vector<double> grad_out{grad_logit};
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& out = cache.outputs[l];
    if (layers[l].activation == Activation::kRelu) {
      for (std::size_t j = 0; j < out.size(); ++j) {
        if (out[j] <= 0.0) grad_out[j] = 0.0;
      }
    }
    outer_add(grad_out, cache.inputs[l], *grads[l].weight);
    axpy(1.0, grad_out, grads[l].bias->data());
    std::vector<double> grad_in(cache.inputs[l].size(), 0.0);
    matvec_transpose_add(*layers[l].weight, grad_out, grad_in);
    grad_out = std::move(grad_in);
  }
  axpy(1.0, grad_out, grad_x);
}

// ---------------------------------------------------------------------------

std::span<const double> Param::lookup(std::size_t id) const {
  if (id >= value.rows()) {
    throw DataError("embedding '" + name + "': id " + std::to_string(id) +
                    " out of vocabulary (size " + std::to_string(value.rows()) + ")");
  }
  return value.row(id);
}

std::span<double> Param::grad_row(std::size_t id) {
  if (id == 0) return {};
  if (touched_mask[id] == 0) {
    touched_mask[id] = 1;
    touched_rows.push_back(static_cast<std::uint32_t>(id));
  }
  return grad.row(id);
}

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols, bool sparse) {
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name '" + name + "'");
  }
  Param p;
  p.name = std::move(name);
  p.value = Matrix(rows, cols);
  p.grad = Matrix(rows, cols);
  p.accum = Matrix(rows, cols);
  p.sparse = sparse;
  if (sparse) p.touched_mask.assign(rows, 0);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

const Param& ParamStore::at(std::string_view name) const { return params_[index_of(name)]; }
Param& ParamStore::at(std::string_view name) { return params_[index_of(name)]; }

void ParamStore::zero_grad() {
  for (auto& p : params_) {
    if (p.sparse) {
      for (auto r : p.touched_rows) {
        auto row = p.grad.row(r);
        std::fill(row.begin(), row.end(), 0.0);
        p.touched_mask[r] = 0;
      }
      p.touched_rows.clear();
    } else {
      p.grad.fill(0.0);
    }
  }
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void adagrad_update(Matrix& value, const Matrix& grad, Matrix& accum, const AdagradConfig& cfg) {
  if (value.rows() != grad.rows() || value.cols() != grad.cols() ||
      accum.rows() != grad.rows() || accum.cols() != grad.cols()) {
    throw KernelError("adagrad: shape mismatch");
  }
  auto v = value.data();
  auto g = grad.data();
  auto a = accum.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    a[i] = cfg.decay * a[i] + g[i] * g[i];
    if (g[i] != 0.0) v[i] -= cfg.learning_rate * g[i] / std::sqrt(a[i] + cfg.epsilon);
  }
}

void adagrad_update_rows(Matrix& value, const Matrix& grad, Matrix& accum,
                         std::span<const std::uint32_t> rows, const AdagradConfig& cfg) {
  if (value.rows() != grad.rows() || value.cols() != grad.cols() ||
      accum.rows() != grad.rows() || accum.cols() != grad.cols()) {
    throw KernelError("adagrad: shape mismatch");
  }
  for (auto r : rows) {
    auto v = value.row(r);
    auto g = grad.row(r);
    auto a = accum.row(r);
    for (std::size_t j = 0; j < v.size(); ++j) {
      a[j] = cfg.decay * a[j] + g[j] * g[j];
      if (g[j] != 0.0) v[j] -= cfg.learning_rate * g[j] / std::sqrt(a[j] + cfg.epsilon);
    }
  }
}

void adagrad_step(ParamStore& store, const AdagradConfig& cfg) {
  for (auto& p : store) {
    if (p.sparse) {
      adagrad_update_rows(p.value, p.grad, p.accum, p.touched_rows, cfg);
    } else {
      adagrad_update(p.value, p.grad, p.accum, cfg);
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<GradCheckEntry> grad_check(ParamStore& store, const LossFunction& loss, double eps, double floor) {
  store.zero_grad();
  const double base = loss(store, true);
  const double again = loss(store, false);
  if (base != again) {
    throw Error("grad_check: loss function is not deterministic (" + std::to_string(base) +
                " vs " + std::to_string(again) + ")");
  }

  std::vector<GradCheckEntry> out;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    // Copy out what we need; loss() may touch store internals.
    const Matrix analytic = store[pi].grad;
    std::vector<std::size_t> entries;
    const std::size_t cols = store[pi].value.cols();
    if (store[pi].sparse) {
      std::vector<std::uint32_t> rows = store[pi].touched_rows;
      std::sort(rows.begin(), rows.end());
      for (auto r : rows) {
        for (std::size_t c = 0; c < cols; ++c) entries.push_back(r * cols + c);
      }
    } else {
      for (std::size_t i = 0; i < store[pi].value.size(); ++i) entries.push_back(i);
    }

    GradCheckEntry entry{store[pi].name, 0.0, entries.size()};
    for (std::size_t idx : entries) {
      double& theta = store[pi].value.data()[idx];
      const double saved = theta;
      theta = saved + eps;
      const double plus = loss(store, false);
      theta = saved - eps;
      const double minus = loss(store, false);
      theta = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic.data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      entry.max_relative_error = std::max(entry.max_relative_error, std::abs(a - numeric) / denom);
    }
    out.push_back(std::move(entry));
  }
  store.zero_grad();
  return out;
}

}  // namespace iu4rec
