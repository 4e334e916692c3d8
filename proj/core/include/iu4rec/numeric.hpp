#pragma once

// Dense kernels, attention, MLP, parameter storage and the Adagrad-with-decay
// optimizer. All training math is double precision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iu4rec {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double value);
  void resize(std::size_t rows, std::size_t cols);

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = W x
void matvec(const Matrix& w, std::span<const double> x, std::span<double> y);
// gx += W^T gy
void matvec_transpose_add(const Matrix& w, std::span<const double> gy, std::span<double> gx);
// g += a b^T
void outer_add(std::span<const double> a, std::span<const double> b, Matrix& g);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Numerically stable in-place softmax (max subtraction).
void softmax_inplace(std::span<double> values);
// Row-wise softmax; throws KernelError naming the first non-finite row.
Matrix softmax_rows(const Matrix& m);

double sigmoid(double x);

// ---------------------------------------------------------------------------
// Multi-head target attention. The target is the query; history rows are both
// keys and values. Projections are (width x input_dim); width is split into
// `heads` contiguous blocks and each block's logits are scaled by
// 1/sqrt(width / heads).

struct AttentionParams {
  const Matrix* wq = nullptr;
  const Matrix* wk = nullptr;
  const Matrix* wv = nullptr;
  std::size_t heads = 1;

  std::size_t width() const { return wq->rows(); }
  std::size_t head_width() const { return wq->rows() / heads; }
};

struct AttentionGrads {
  Matrix* wq = nullptr;
  Matrix* wk = nullptr;
  Matrix* wv = nullptr;
};

// Projected keys/values; independent of the target, so a scorer can reuse
// them across many targets for the same history.
struct ProjectedHistory {
  Matrix keys;
  Matrix values;
};

struct AttentionCache {
  std::vector<double> target;
  Matrix history;
  std::vector<double> query;
  ProjectedHistory projected;
  Matrix weights;  // heads x rows
};

void validate_attention(const AttentionParams& params, std::size_t target_dim,
                        std::size_t history_dim);

ProjectedHistory project_history(const Matrix& history, const AttentionParams& params);

// Attention output given an already projected query and history.
std::vector<double> attend(std::span<const double> query, const ProjectedHistory& projected,
                           std::size_t heads, Matrix* weights_out = nullptr);

std::vector<double> target_attention(std::span<const double> target, const Matrix& history,
                                     const AttentionParams& params,
                                     AttentionCache* cache = nullptr);

// Accumulates into grads, grad_target and (optionally) grad_history.
void target_attention_backward(const AttentionCache& cache, const AttentionParams& params,
                               std::span<const double> grad_out, const AttentionGrads& grads,
                               std::span<double> grad_target, Matrix* grad_history);

// Scaled pre-softmax logits, heads x rows.
Matrix attention_logits(std::span<const double> target, const Matrix& history,
                        const AttentionParams& params);

// ---------------------------------------------------------------------------
// MLP with a scalar output.

enum class Activation { kIdentity, kRelu };

struct DenseLayerRef {
  const Matrix* weight = nullptr;  // out x in
  const Matrix* bias = nullptr;    // 1 x out
  Activation activation = Activation::kRelu;
};

struct DenseLayerGrads {
  Matrix* weight = nullptr;
  Matrix* bias = nullptr;
};

struct MlpCache {
  std::vector<std::vector<double>> inputs;   // input to each layer
  std::vector<std::vector<double>> outputs;  // post-activation output of each layer
};

// Throws ConfigError when layer dimensions do not chain or the last width != 1.
void validate_mlp(std::size_t input_dim, std::span<const DenseLayerRef> layers);

double mlp_forward(std::span<const double> x, std::span<const DenseLayerRef> layers,
                   MlpCache* cache = nullptr);

void mlp_backward(const MlpCache& cache, std::span<const DenseLayerRef> layers, double grad_logit,
                  std::span<const DenseLayerGrads> grads, std::span<double> grad_x);

// ---------------------------------------------------------------------------
// Named parameter arrays with paired gradient and optimizer state.
// Sparse params are embedding tables: gradients are tracked per touched row,
// and row 0 is the padding row, kept at zero and never updated.

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix accum;
  bool sparse = false;
  std::vector<std::uint32_t> touched_rows;
  std::vector<std::uint8_t> touched_mask;

  std::span<const double> lookup(std::size_t id) const;
  // Gradient row for a lookup; returns an empty span for the padding row.
  std::span<double> grad_row(std::size_t id);
};

class ParamStore {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool sparse);

  Param& operator[](std::size_t index) { return params_[index]; }
  const Param& operator[](std::size_t index) const { return params_[index]; }
  const Param& at(std::string_view name) const;
  Param& at(std::string_view name);
  std::size_t index_of(std::string_view name) const;
  std::size_t size() const { return params_.size(); }

  std::vector<Param>::iterator begin() { return params_.begin(); }
  std::vector<Param>::iterator end() { return params_.end(); }
  std::vector<Param>::const_iterator begin() const { return params_.begin(); }
  std::vector<Param>::const_iterator end() const { return params_.end(); }

  void zero_grad();
  std::size_t total_values() const;

 private:
  std::vector<Param> params_;
};

struct AdagradConfig {
  double learning_rate = 1e-4;
  double decay = 0.9999;
  double epsilon = 1e-8;
};

// G <- decay*G + g^2;  value <- value - lr * g / sqrt(G + eps)
void adagrad_update(Matrix& value, const Matrix& grad, Matrix& accum, const AdagradConfig& cfg);
// Same update restricted to the listed rows; other rows keep value and state.
void adagrad_update_rows(Matrix& value, const Matrix& grad, Matrix& accum,
                         std::span<const std::uint32_t> rows, const AdagradConfig& cfg);
void adagrad_step(ParamStore& store, const AdagradConfig& cfg);

// ---------------------------------------------------------------------------
// Central finite-difference gradient check.

// Evaluates the loss at the store's current values. When with_grad is true it
// must also accumulate the analytic gradient into the (already zeroed) grads.
using LossFunction = std::function<double(ParamStore&, bool with_grad)>;

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Dense arrays are checked entrywise; sparse tables on their touched rows.
// Relative error is |a - n| / max(|a|, |n|, floor). Central differences carry
// about ulp(loss) / (2 eps) of rounding noise, so entries with gradients far
// below that noise over the floor cannot pass a tight relative bound.
inline constexpr double kGradCheckFloor = 1e-8;
std::vector<GradCheckEntry> grad_check(ParamStore& store, const LossFunction& loss, double eps,
                                       double floor = kGradCheckFloor);

}  // namespace iu4rec
