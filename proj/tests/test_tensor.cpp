#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "hyperbrain/error.hpp"
#include "hyperbrain/tensor.hpp"
#include "oracles.hpp"

using namespace hyperbrain;
using namespace hyperbrain::tensor;
using gradcheck::max_error;
using Vars = std::vector<Var>;

namespace {

std::mt19937_64 rng(12345);

Tensor rand(std::size_t r, std::size_t c, double scale = 1.0) { return oracle::random_tensor(r, c, rng, scale); }

Tensor positive(std::size_t r, std::size_t c) {
  Tensor t = rand(r, c);
  for (double& v : t.data()) v = 0.5 + std::abs(v);
  return t;
}

}  // namespace

TEST_CASE("analytic gradients of simple expressions") {
  Tape tape;
  const Var x = tape.variable(Tensor::scalar(3.0));
  tape.backward(mul(x, x));
  CHECK(x.grad().item() == 6.0);

  Tape tape2;
  const Var v = tape2.variable(Tensor(1, 5, 2.0));
  tape2.backward(mean_all(v));
  for (double g : v.grad().data()) CHECK(g == doctest::Approx(0.2));
}

TEST_CASE("shape errors name the op and both shapes") {
  Tape tape;
  const Var a = tape.constant(Tensor(2, 3));
  const Var b = tape.constant(Tensor(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, tape.constant(Tensor(3, 2))), ShapeError);
  CHECK_THROWS_AS(add_row(a, tape.constant(Tensor(1, 2))), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("matmul") != std::string::npos);
    CHECK(what.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(tape.backward(a), ShapeError);
}

TEST_CASE("forward values") {
  Tape tape;
  const Var a = tape.constant(Tensor(2, 2, {1, 2, 3, 4}));
  const Var b = tape.constant(Tensor(2, 2, {5, 6, 7, 8}));
  CHECK(matmul(a, b).value() == Tensor(2, 2, {19, 22, 43, 50}));
  CHECK(mean_axis(a, 0).value() == Tensor(1, 2, {2, 3}));
  CHECK(mean_axis(a, 1).value() == Tensor(2, 1, {1.5, 3.5}));
  const Var parts[] = {a, b};
  CHECK(concat_cols(parts).value() == Tensor(2, 4, {1, 2, 5, 6, 3, 4, 7, 8}));
  CHECK(gelu_value(0.0) == 0.0);
  CHECK(gelu_value(1.0) == doctest::Approx(0.8413447460685429));
  CHECK(sigmoid(tape.constant(Tensor::scalar(0.0))).value().item() == 0.5);
  const int rows[] = {1, 1, 0};
  CHECK(gather_rows(a, rows).value() == Tensor(3, 2, {3, 4, 3, 4, 1, 2}));
  CHECK(segment_mean(a, {{0, 1}, {}}, true).value() == Tensor(2, 2, {2, 3, 0, 0}));
  // Two stacked 2x2 blocks transpose independently.
  const Var stacked = tape.constant(Tensor(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
  CHECK(block_transpose(stacked, 2).value() == Tensor(4, 2, {1, 3, 2, 4, 5, 7, 6, 8}));
}

TEST_CASE("layer norm moments") {
  Tape tape;
  const Tensor x = rand(6, 9, 1.0);
  const auto y = layer_norm(tape.constant(x)).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0, var = 0, in_mean = 0, in_var = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      mean += y(r, c);
      in_mean += x(r, c);
    }
    mean /= 9;
    in_mean /= 9;
    for (std::size_t c = 0; c < 9; ++c) {
      var += (y(r, c) - mean) * (y(r, c) - mean);
      in_var += (x(r, c) - in_mean) * (x(r, c) - in_mean);
    }
    var /= 9;
    in_var /= 9;
    CHECK(std::abs(mean) < 1e-10);
    // The eps in the denominator shrinks the variance to var / (var + eps).
    CHECK(std::abs(var - in_var / (in_var + kLayerNormEps)) < 1e-10);
  }
  // With large input spread the eps is negligible and the variance is 1.
  const auto z = layer_norm(tape.constant(rand(3, 16, 1e4))).value();
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 16; ++c) mean += z(r, c) / 16;
    for (std::size_t c = 0; c < 16; ++c) var += (z(r, c) - mean) * (z(r, c) - mean) / 16;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-10);
  }
}

TEST_CASE("every op matches central differences") {
  const double tol = 1e-6;
  CHECK(max_error([](Tape&, const Vars& v) { return matmul(v[0], v[1]); }, {rand(3, 4), rand(4, 2)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return add(v[0], v[1]); }, {rand(3, 4), rand(3, 4)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return add_row(v[0], v[1]); }, {rand(3, 4), rand(1, 4)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return mul(v[0], v[1]); }, {rand(3, 4), rand(3, 4)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return affine(v[0], -1.7, 0.3); }, {rand(2, 5)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return mean_axis(v[0], 0); }, {rand(4, 3)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return mean_axis(v[0], 1); }, {rand(4, 3)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return mean_all(v[0]); }, {rand(4, 3)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return concat_cols(v); }, {rand(3, 2), rand(3, 4), rand(3, 1)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return layer_norm(v[0]); }, {rand(3, 6)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return gelu(v[0]); }, {rand(3, 5, 2.0)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return cos(v[0]); }, {rand(3, 5, 2.0)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return sigmoid(v[0]); }, {rand(3, 5, 2.0)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return log(v[0]); }, {positive(3, 5)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return clamp(v[0], -0.5, 0.5); }, {rand(3, 5, 0.2)}) < tol);
  CHECK(max_error(
            [](Tape&, const Vars& v) {
              const int rows[] = {2, 0, 2, 1};
              return gather_rows(v[0], rows);
            },
            {rand(3, 4)}) < tol);
  for (bool canonical : {false, true})
    CHECK(max_error([&](Tape&, const Vars& v) { return segment_mean(v[0], {{0, 3}, {1}, {}, {2, 4, 0}}, canonical); },
                    {rand(5, 3)}) < tol);
  CHECK(max_error([](Tape&, const Vars& v) { return block_transpose(v[0], 3); }, {rand(6, 4)}) < tol);
}

TEST_CASE("random composites match central differences") {
  const double tol = 1e-6;
  CHECK(max_error(
            [](Tape&, const Vars& v) {
              const Var h = gelu(add_row(matmul(layer_norm(v[0]), v[1]), v[2]));
              return sigmoid(mean_axis(h, 1));
            },
            {rand(4, 5), rand(5, 3), rand(1, 3)}) < tol);
  CHECK(max_error(
            [](Tape&, const Vars& v) {
              const Var t = cos(add(mul(v[0], v[1]), v[0]));
              const Var parts[] = {t, layer_norm(v[1])};
              return mean_axis(concat_cols(parts), 0);
            },
            {rand(3, 4), rand(3, 4)}) < tol);
  CHECK(max_error(
            [](Tape&, const Vars& v) {
              const Var x = block_transpose(matmul(v[0], v[1]), 2);
              const Var pooled = segment_mean(gelu(x), {{0, 1}, {2, 3, 1}}, true);
              return log(clamp(sigmoid(pooled), 1e-7, 1 - 1e-7));
            },
            {rand(4, 3), rand(3, 2)}) < tol);
}

TEST_CASE("canonical segment mean is independent of row order") {
  Tape tape;
  const Tensor x = rand(7, 4);
  const auto a = segment_mean(tape.constant(x), {{0, 1, 2, 3, 4, 5, 6}}, true).value();
  const auto b = segment_mean(tape.constant(x), {{6, 2, 4, 0, 1, 5, 3}}, true).value();
  CHECK(a == b);
}

TEST_CASE("gradients accumulate across shared uses") {
  Tape tape;
  const Var x = tape.variable(Tensor::scalar(2.0));
  const Var y = add(mul(x, x), affine(x, 3.0, 0.0));  // x^2 + 3x
  tape.backward(y);
  CHECK(x.grad().item() == 7.0);
}
