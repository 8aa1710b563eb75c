#include "hyperbrain/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hyperbrain/error.hpp"

namespace hyperbrain::tensor {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + a.shape_string() + " " + why);
}

bool any_grad(std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(), [](Var v) { return v.tape->requires_grad(v.id); });
}

// Elementwise unary op with derivative f'(x, y).
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  const int ia = a.id;
  return a.tape->record(std::move(y), any_grad({a}), [ia, df](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const auto xs = tape.value(ia).data();
    const auto ys = tape.value(self).data();
    const auto gy = tape.grad(self).data();
    auto gx = tape.grad_buffer(ia).data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * df(xs[i], ys[i]);
  });
}

bool row_less(const Tensor& t, int a, int b) {
  const auto ra = t.row_span(a);
  const auto rb = t.row_span(b);
  return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Tensor: " + std::to_string(data_.size()) + " values for shape " + shape_string());
  }
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor(1, values.size(), std::vector<double>(values));
}

std::string Tensor::shape_string() const { return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]"; }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item: tensor " + shape_string() + " is not a scalar");
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }
Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop) {
  nodes_.push_back({std::move(value), Tensor(), requires_grad, std::move(backprop)});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buffer(int id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size() || node.grad.rows() != node.value.rows())
    node.grad = Tensor(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: variable from another tape");
  if (value(loss.id).size() != 1) shape_error("backward", value(loss.id), "is not a scalar loss");
  grad_buffer(loss.id).data()[0] += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    auto& node = nodes_[id];
    if (!node.requires_grad || !node.backprop || node.grad.size() == 0) continue;
    node.backprop(*this, id);
  }
}

Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) shape_error("matmul", x, y);
  Tensor out(x.rows(), y.cols());
  out.mat().noalias() = x.mat() * y.mat();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), any_grad({a, b}), [ia, ib](Tape& tape, int self) {
    const auto g = tape.grad(self).mat();
    if (tape.requires_grad(ia)) tape.grad_buffer(ia).mat().noalias() += g * tape.value(ib).mat().transpose();
    if (tape.requires_grad(ib)) tape.grad_buffer(ib).mat().noalias() += tape.value(ia).mat().transpose() * g;
  });
}

Var add(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error("add", x, y);
  Tensor out = x;
  out.mat() += y.mat();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), any_grad({a, b}), [ia, ib](Tape& tape, int self) {
    for (int i : {ia, ib})
      if (tape.requires_grad(i)) tape.grad_buffer(i).mat() += tape.grad(self).mat();
  });
}

Var add_row(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (y.rows() != 1 || x.cols() != y.cols()) shape_error("add_row", x, y);
  Tensor out = x;
  out.mat().rowwise() += y.mat().row(0);
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), any_grad({a, b}), [ia, ib](Tape& tape, int self) {
    const auto g = tape.grad(self).mat();
    if (tape.requires_grad(ia)) tape.grad_buffer(ia).mat() += g;
    if (tape.requires_grad(ib)) tape.grad_buffer(ib).mat() += g.colwise().sum();
  });
}

Var mul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_error("mul", x, y);
  Tensor out = x;
  out.mat().array() *= y.mat().array();
  const int ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), any_grad({a, b}), [ia, ib](Tape& tape, int self) {
    const auto g = tape.grad(self).mat().array();
    if (tape.requires_grad(ia)) tape.grad_buffer(ia).mat().array() += g * tape.value(ib).mat().array();
    if (tape.requires_grad(ib)) tape.grad_buffer(ib).mat().array() += g * tape.value(ia).mat().array();
  });
}

Var affine(Var a, double scale, double shift) {
  return unary(a, [=](double x) { return scale * x + shift; }, [=](double, double) { return scale; });
}

Var mean_axis(Var a, int axis) {
  const Tensor& x = a.value();
  if (axis != 0 && axis != 1) throw ShapeError("mean_axis: axis must be 0 or 1");
  if (x.size() == 0) shape_error("mean_axis", x, "is empty");
  Tensor out = axis == 0 ? Tensor(1, x.cols()) : Tensor(x.rows(), 1);
  if (axis == 0) {
    out.mat() = x.mat().colwise().mean();
  } else {
    out.mat() = x.mat().rowwise().mean();
  }
  const int ia = a.id;
  return a.tape->record(std::move(out), any_grad({a}), [ia, axis](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    auto gx = tape.grad_buffer(ia).mat();
    const auto g = tape.grad(self).mat();
    if (axis == 0) {
      gx.rowwise() += g.row(0) / static_cast<double>(gx.rows());
    } else {
      gx.colwise() += g.col(0) / static_cast<double>(gx.cols());
    }
  });
}

Var mean_all(Var a) {
  const Tensor& x = a.value();
  if (x.size() == 0) shape_error("mean_all", x, "is empty");
  const int ia = a.id;
  return a.tape->record(Tensor::scalar(x.mat().mean()), any_grad({a}), [ia](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    auto& gx = tape.grad_buffer(ia);
    gx.mat().array() += tape.grad(self).item() / static_cast<double>(gx.size());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool needs_grad = false;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
    needs_grad = needs_grad || p.tape->requires_grad(p.id);
    ids.push_back(p.id);
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    out.mat().middleCols(offset, p.cols()) = p.value().mat();
    offset += p.cols();
  }
  return parts[0].tape->record(std::move(out), needs_grad, [ids](Tape& tape, int self) {
    std::size_t offset = 0;
    const auto g = tape.grad(self).mat();
    for (int id : ids) {
      const auto width = tape.value(id).cols();
      if (tape.requires_grad(id)) tape.grad_buffer(id).mat() += g.middleCols(offset, width);
      offset += width;
    }
  });
}

Var layer_norm(Var a) {
  const Tensor& x = a.value();
  if (x.cols() == 0) shape_error("layer_norm", x, "has no columns");
  Tensor out(x.rows(), x.cols());
  Tensor inv_std(x.rows(), 1);
  const double n = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row_span(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    const double s = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std(r, 0) = s;
    auto y = out.row_span(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] = (row[c] - mean) * s;
  }
  const int ia = a.id;
  return a.tape->record(std::move(out), any_grad({a}), [ia, inv_std = std::move(inv_std)](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const Tensor& y = tape.value(self);
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad_buffer(ia);
    const double n = static_cast<double>(y.cols());
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const auto yr = y.row_span(r);
      const auto gr = g.row_span(r);
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) {
        mean_g += gr[c];
        mean_gy += gr[c] * yr[c];
      }
      mean_g /= n;
      mean_gy /= n;
      auto out = gx.row_span(r);
      for (std::size_t c = 0; c < yr.size(); ++c) out[c] += inv_std(r, 0) * (gr[c] - mean_g - yr[c] * mean_gy);
    }
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

Var gelu(Var a) {
  return unary(a, gelu_value, [](double x, double) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    return cdf + x * pdf;
  });
}

Var cos(Var a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [=](double x) { return std::clamp(x, lo, hi); },
      [=](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var gather_rows(Var a, std::span<const int> rows) {
  const Tensor& x = a.value();
  Tensor out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= x.rows())
      shape_error("gather_rows", x, "has no row " + std::to_string(rows[i]));
    std::copy_n(x.row_span(rows[i]).begin(), x.cols(), out.row_span(i).begin());
  }
  const int ia = a.id;
  std::vector<int> idx(rows.begin(), rows.end());
  return a.tape->record(std::move(out), any_grad({a}), [ia, idx = std::move(idx)](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad_buffer(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto dst = gx.row_span(idx[i]);
      const auto src = g.row_span(i);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var segment_mean(Var a, const std::vector<std::vector<int>>& segments, bool canonical) {
  const Tensor& x = a.value();
  Tensor out(segments.size(), x.cols());
  std::vector<int> order;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.empty()) continue;
    order.assign(seg.begin(), seg.end());
    for (int r : order)
      if (r < 0 || static_cast<std::size_t>(r) >= x.rows())
        shape_error("segment_mean", x, "has no row " + std::to_string(r));
    if (canonical) std::sort(order.begin(), order.end(), [&](int p, int q) { return row_less(x, p, q); });
    auto dst = out.row_span(s);
    for (int r : order) {
      const auto src = x.row_span(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(seg.size());
    for (double& v : dst) v *= inv;
  }
  const int ia = a.id;
  return a.tape->record(std::move(out), any_grad({a}), [ia, segments](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad_buffer(ia);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (segments[s].empty()) continue;
      const double inv = 1.0 / static_cast<double>(segments[s].size());
      const auto src = g.row_span(s);
      for (int r : segments[s]) {
        auto dst = gx.row_span(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c] * inv;
      }
    }
  });
}

Var block_transpose(Var a, std::size_t blocks) {
  const Tensor& x = a.value();
  if (blocks == 0 || x.rows() % blocks != 0) shape_error("block_transpose", x, "is not divisible into blocks");
  const std::size_t p = x.rows() / blocks;
  const std::size_t q = x.cols();
  Tensor out(blocks * q, p);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) out(b * q + j, i) = x(b * p + i, j);
  const int ia = a.id;
  return a.tape->record(std::move(out), any_grad({a}), [ia, blocks, p, q](Tape& tape, int self) {
    if (!tape.requires_grad(ia)) return;
    const Tensor& g = tape.grad(self);
    Tensor& gx = tape.grad_buffer(ia);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) gx(b * p + i, j) += g(b * q + j, i);
  });
}

}  // namespace hyperbrain::tensor
