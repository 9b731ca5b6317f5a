#include <doctest.h>

#include <cmath>

#include "pairrank/optim.hpp"

using namespace pairrank;

TEST_SUITE("optim") {

TEST_CASE("global norm clipping") {
  std::vector<Matrix> g = {Matrix(1, 2, {6, 8})};
  CHECK(clip_global_norm(g, 5.0) == 10.0);
  CHECK(g[0](0, 0) == 3.0);
  CHECK(g[0](0, 1) == 4.0);

  std::vector<Matrix> boundary = {Matrix(1, 2, {3, 4})};
  clip_global_norm(boundary, 5.0);
  CHECK(boundary[0] == Matrix(1, 2, {3, 4}));

  std::vector<Matrix> small = {Matrix(1, 1, {3}), Matrix(1, 1, {0})};
  clip_global_norm(small, 5.0);
  CHECK(small[0](0, 0) == 3.0);

  std::vector<Matrix> spread = {Matrix(2, 2, {10, -20, 30, 5}), Matrix(1, 3, {7, 7, -7})};
  clip_global_norm(spread, 5.0);
  CHECK(global_norm(spread) <= 5.0 * (1 + 1e-12));
}

TEST_CASE("adam zero gradient still counts the step") {
  std::vector<Matrix> p = {Matrix::scalar(1.5)};
  Adam adam(p);
  adam.step(p, {Matrix::scalar(0.0)});
  CHECK(p[0](0, 0) == 1.5);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam first step moves by about lr against the gradient") {
  std::vector<Matrix> p = {Matrix(1, 2, {0.0, 0.0})};
  Adam adam(p, {0.001, 0.9, 0.999, 0.0});
  adam.step(p, {Matrix(1, 2, {0.37, -12.0})});
  CHECK(p[0](0, 0) == doctest::Approx(-0.001).epsilon(1e-12));
  CHECK(p[0](0, 1) == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("adam two-step recurrence") {
  std::vector<Matrix> p = {Matrix::scalar(1.0)};
  Adam adam(p);
  adam.step(p, {Matrix::scalar(0.5)});
  CHECK(std::fabs(p[0](0, 0) - 0.9990000000199999996) <= 1e-12);
  adam.step(p, {Matrix::scalar(-0.3)});
  CHECK(std::fabs(p[0](0, 0) - 0.99880850198941775055) <= 1e-12);
}

TEST_CASE("adam rejects mismatched shapes") {
  std::vector<Matrix> p = {Matrix(2, 2)};
  Adam adam(p);
  CHECK_THROWS(adam.step(p, {Matrix(2, 1)}));
}

}  // TEST_SUITE
