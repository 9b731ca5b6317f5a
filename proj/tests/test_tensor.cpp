#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "pairrank/rng.hpp"
#include "pairrank/tensor.hpp"

using namespace pairrank;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double range = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = uniform(rng, -range, range);
  return m;
}

// Builds loss(inputs) on a fresh tape and returns its value; when grads is
// given, also the gradient of every input.
using Graph = std::function<Var(Tape&, const std::vector<Var>&)>;

double run_graph(const Graph& g, const std::vector<Matrix>& inputs, std::vector<Matrix>* grads) {
  Tape tape;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(tape.parameter(inputs[i], i));
  const Var loss = g(tape, vars);
  if (grads) {
    tape.backward(loss);
    for (std::size_t i = 0; i < inputs.size(); ++i) grads->push_back(Matrix(inputs[i].rows, inputs[i].cols));
    tape.accumulate_parameter_grads(*grads);
  }
  return loss.scalar();
}

double max_rel_error(const Graph& g, std::vector<Matrix> inputs) {
  std::vector<Matrix> analytic;
  run_graph(g, inputs, &analytic);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double orig = inputs[i].data[k];
      inputs[i].data[k] = orig + h;
      const double plus = run_graph(g, inputs, nullptr);
      inputs[i].data[k] = orig - h;
      const double minus = run_graph(g, inputs, nullptr);
      inputs[i].data[k] = orig;
      const double numeric = (plus - minus) / (2 * h);
      const double a = analytic[i].data[k];
      worst = std::max(worst, std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-6}));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul") {
  const Matrix b(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(matmul(Matrix::identity(2), b) == b);
  CHECK(matmul(Matrix::scalar(2), Matrix::scalar(3)) == Matrix::scalar(6));
  CHECK_THROWS_AS(matmul(b, b), ShapeError);

  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(rng, 3, 4), y = random_matrix(rng, 4, 2);
  const Matrix z = matmul(x, y);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += x(i, k) * y(k, j);
      CHECK(std::fabs(z(i, j) - s) <= 1e-12);
    }
  CHECK(transpose(transpose(x)) == x);
}

TEST_CASE("softmax columns") {
  const Matrix constant(4, 1, 2.5);
  for (double v : softmax_cols(constant).data) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  const std::vector<bool> mask = {false, true};
  const Matrix masked = softmax_cols(Matrix(2, 1, 0.0), &mask);
  CHECK(masked(0, 0) == 1.0);
  CHECK(masked(1, 0) == 0.0);

  const Matrix s = softmax_cols(Matrix(3, 1, {1, 2, 3}));
  CHECK(s(0, 0) == doctest::Approx(0.090030573170380457998).epsilon(1e-14));
  CHECK(s(1, 0) == doctest::Approx(0.24472847105479765247).epsilon(1e-14));
  CHECK(s(2, 0) == doctest::Approx(0.66524095577482188953).epsilon(1e-14));

  const std::vector<bool> all = {true, true};
  CHECK_THROWS(softmax_cols(Matrix(2, 1, 0.0), &all));
}

TEST_CASE("softmax property: columns sum to one, shift invariant") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = 1 + uniform_index(rng, 8), c = 1 + uniform_index(rng, 5);
    Matrix m = random_matrix(rng, r, c, 30.0);
    const Matrix s = softmax_cols(m);
    Matrix shifted = m;
    for (std::size_t j = 0; j < c; ++j) {
      const double shift = uniform(rng, -100, 100);
      for (std::size_t i = 0; i < r; ++i) shifted(i, j) += shift;
    }
    const Matrix t = softmax_cols(shifted);
    for (std::size_t j = 0; j < c; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < r; ++i) {
        sum += s(i, j);
        CHECK(std::fabs(s(i, j) - t(i, j)) <= 1e-12);
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("simple gradients") {
  Tape tape;
  const Matrix xv0 = Matrix::scalar(3.0);
  const Var x = tape.parameter(xv0, 0);
  tape.backward(x);
  CHECK(tape.grad(x.id()) == Matrix::scalar(1.0));

  Tape t2;
  const Matrix xv(2, 2, {1, -2, 3, 0.5});
  const Var y = t2.parameter(xv, 0);
  t2.backward(sum(mul(y, y)));
  CHECK(t2.grad(y.id()) == Matrix(2, 2, {2, -4, 6, 1}));
  CHECK_THROWS(t2.backward(sum(y)));
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  const Matrix xv(2, 1, 1.0);
  const Var x = tape.parameter(xv, 0);
  CHECK_THROWS(tape.backward(x));
}

TEST_CASE("finite differences on every op") {
  std::mt19937_64 rng(5);
  auto check = [&](const char* name, const Graph& g, std::vector<Matrix> inputs) {
    INFO(name);
    CHECK(max_rel_error(g, std::move(inputs)) < 1e-6);
  };
  const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2), c = random_matrix(rng, 3, 4);
  const Matrix col = random_matrix(rng, 3, 1), w = random_matrix(rng, 2, 3);
  auto weighted = [](Var v, const Matrix& weights) {
    return sum(mul(v, v.tape().constant(weights)));
  };
  const Matrix w34 = random_matrix(rng, 3, 4), w32 = random_matrix(rng, 3, 2), w43 = random_matrix(rng, 4, 3);

  check("matmul", [&](Tape&, const auto& v) { return weighted(matmul(v[0], v[1]), w32); }, {a, b});
  check("transpose", [&](Tape&, const auto& v) { return weighted(transpose(v[0]), w43); }, {a});
  check("add/sub/mul", [&](Tape&, const auto& v) { return weighted(mul(add(v[0], v[1]), sub(v[0], v[1])), w34); },
        {a, c});
  check("broadcast", [&](Tape&, const auto& v) {
    return weighted(mul_broadcast(add_broadcast(v[0], v[1]), v[1]), w34);
  }, {a, col});
  check("scale/tanh/sigmoid", [&](Tape&, const auto& v) { return weighted(sigmoid(tanh(scale(v[0], 1.7))), w34); },
        {a});
  // Row 1 masked in every column.
  std::vector<bool> mask(12, false);
  for (std::size_t c = 0; c < 4; ++c) mask[4 + c] = true;
  check("softmax", [&](Tape&, const auto& v) { return weighted(softmax_cols(v[0]), w34); }, {a});
  check("masked softmax", [&](Tape&, const auto& v) { return weighted(softmax_cols(v[0], &mask), w34); }, {a});
  check("concat/slice", [&](Tape&, const auto& v) {
    const Var rows = concat_rows(std::vector<Var>{v[0], v[1]});
    const Var cols = concat_cols(std::vector<Var>{v[0], v[1]});
    return add(weighted(slice_rows(rows, 2, 3), w34), weighted(slice_cols(cols, 3, 2), w32));
  }, {a, c});
  check("max_cols", [&](Tape&, const auto& v) { return weighted(max_cols(v[0]), Matrix(3, 1, {0.3, -1.1, 2.0})); },
        {a});
  check("log_floor", [&](Tape&, const auto& v) { return sum(log_floor(sigmoid(v[0]), 1e-12)); }, {a});
  check("matmul chain", [&](Tape&, const auto& v) {
    return weighted(tanh(matmul(v[0], matmul(v[1], transpose(v[1])))), Matrix(2, 3, 0.5));
  }, {w, a});
}

TEST_CASE("max_cols gradient goes to the argmax only") {
  Tape tape;
  const Matrix xv(2, 3, {1, 5, 2, 7, -1, 7});
  const Var x = tape.parameter(xv, 0);
  const Var m = max_cols(x);
  CHECK(m.value() == Matrix(2, 1, {5, 7}));
  tape.backward(sum(m));
  CHECK(tape.grad(x.id()) == Matrix(2, 3, {0, 1, 0, 1, 0, 0}));
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(9);
  Tape tape;
  const Var x = tape.constant(Matrix(1, 1000, 1.0));
  CHECK(dropout(x, 0.2, false, rng).value() == x.value());
  const Matrix d = dropout(x, 0.2, true, rng).value();
  std::size_t kept = 0;
  for (double v : d.data) {
    CHECK((v == 0.0 || v == doctest::Approx(1.25).epsilon(1e-15)));
    kept += v != 0.0;
  }
  CHECK(kept > 740);
  CHECK(kept < 860);
}

TEST_CASE("shape errors") {
  Tape tape;
  const Var a = tape.constant(Matrix(2, 3));
  const Var b = tape.constant(Matrix(3, 2));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(slice_rows(a, 1, 2), ShapeError);
  CHECK_THROWS_AS(add_broadcast(a, b), ShapeError);
}

}  // TEST_SUITE
