#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hyperbrain::tensor {

using MatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Dense row-major 2-D array of 64-bit reals. Vectors are 1 x n, scalars 1 x 1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::initializer_list<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  std::string shape_string() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double item() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  MatrixMap mat() { return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)}; }
  ConstMatrixMap mat() const {
    return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
  }

  bool all_finite() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node of a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records forward operations for reverse-mode differentiation. Nodes are
/// appended in evaluation order, so reverse creation order is a valid
/// topological order for backward.
class Tape {
 public:
  Var constant(Tensor value);
  Var variable(Tensor value);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node that requires a
  /// gradient. `loss` must be 1 x 1.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var record(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop);
  Tensor& grad_buffer(int id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, int)> backprop;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a (m x n) + row vector b (1 x n) broadcast over rows.
Var add_row(Var a, Var b);
Var mul(Var a, Var b);
/// scale * a + shift
Var affine(Var a, double scale, double shift);
/// axis 0 -> 1 x cols (column means), axis 1 -> rows x 1 (row means).
Var mean_axis(Var a, int axis);
Var mean_all(Var a);
Var concat_cols(std::span<const Var> parts);
/// Row-wise normalisation to zero mean, unit variance (eps = 1e-5).
Var layer_norm(Var a);
Var gelu(Var a);
Var cos(Var a);
Var sigmoid(Var a);
Var log(Var a);
/// Gradient passes only where lo < a < hi.
Var clamp(Var a, double lo, double hi);
Var gather_rows(Var a, std::span<const int> rows);

/// Row mean of each segment of `a`. Empty segments yield zero rows. With
/// `canonical`, each segment's rows are summed in lexicographic order of
/// their values, which makes the result independent of row order bit for bit.
Var segment_mean(Var a, const std::vector<std::vector<int>>& segments, bool canonical);

/// Treats a as `blocks` stacked p x q matrices and transposes each, giving
/// (blocks * q) x p.
Var block_transpose(Var a, std::size_t blocks);

inline constexpr double kLayerNormEps = 1e-5;

double gelu_value(double x);

}  // namespace hyperbrain::tensor
