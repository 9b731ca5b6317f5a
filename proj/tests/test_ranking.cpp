#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pairrank/ranking.hpp"
#include "pairrank/rng.hpp"

using namespace pairrank;

namespace {

Pdm random_pdm(std::mt19937_64& rng, std::size_t n) {
  Pdm pdm(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      // Some exact ties so zero-weight edges in both directions occur.
      const double p = uniform_index(rng, 8) == 0 ? 0.5 : uniform01(rng);
      pdm.set(i, j, p);
    }
  return pdm;
}

// Best path sum over all permutations, and the lexicographically smallest
// permutation achieving it.
std::pair<int, std::vector<std::size_t>> enumerate_best(const Pdm& pdm) {
  std::vector<std::size_t> perm(pdm.size());
  std::iota(perm.begin(), perm.end(), 0);
  int best = -1;
  std::vector<std::size_t> arg;
  do {
    const int s = path_sum(pdm, perm);
    if (s > best) {
      best = s;
      arg = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, arg};
}

Pdm three_cycle() {
  Pdm pdm(3);
  pdm.set(0, 1, 0.8);
  pdm.set(1, 2, 0.7);
  pdm.set(2, 0, 0.9);
  return pdm;
}

}  // namespace

TEST_SUITE("ranking") {

TEST_CASE("pdm invariants") {
  Pdm pdm(3);
  CHECK(pdm(0, 0) == 0.5);
  pdm.set(0, 2, 0.3);
  CHECK(pdm(2, 0) == 0.7);
  CHECK_THROWS(Pdm(1));
  CHECK_THROWS(pdm.set(0, 1, 1.5));
}

TEST_CASE("pdm from scores") {
  const std::vector<double> scores = {2, 1, 0};
  const Pdm pdm = pdm_from_scores(scores);
  CHECK(std::fabs(pdm(0, 1) - 0.73105857863000487925) <= 1e-15);
  CHECK(std::fabs(pdm(0, 2) - 0.88079707797788244406) <= 1e-15);
  CHECK(pdm(1, 0) + pdm(0, 1) == 1.0);

  const std::vector<double> same = {0.3, 0.3, 0.3, 0.3};
  const Pdm flat = pdm_from_scores(same);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(flat(i, j) == 0.5);
}

TEST_CASE("greedy rank") {
  Pdm total(5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) total.set(i, j, 1.0);
  CHECK(greedy_rank(total).rank == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(greedy_rank(Pdm(6)).rank == std::vector<std::size_t>{1, 2, 3, 4, 5, 6});

  const std::vector<double> scores = {0.1, 0.9, 0.5, 0.3};
  const Pdm pdm = pdm_from_scores(scores);
  const RankingResult r = greedy_rank(pdm);
  CHECK(r.rank == std::vector<std::size_t>{4, 1, 2, 3});
  CHECK(r.order == std::vector<std::size_t>{1, 2, 3, 0});
  CHECK(enumerate_best(pdm).second == r.order);
}

TEST_CASE("ranking result invariants") {
  const RankingResult r = ranking_from_order({2, 0, 1});
  CHECK(r.rank == std::vector<std::size_t>{2, 3, 1});
  for (std::size_t i = 0; i < 3; ++i) CHECK(r.order[r.rank[i] - 1] == i);
  CHECK_THROWS(ranking_from_order({0, 0, 1}));
}

TEST_CASE("exact rank") {
  const std::vector<double> scores = {0.4, -1.0, 2.5, 0.0, 1.1};
  const Pdm pdm = pdm_from_scores(scores);
  const RankingResult r = exact_rank(pdm);
  CHECK(path_sum(pdm, r.order) == 4);
  CHECK(r.order == argsort_descending(scores));

  const Pdm cycle = three_cycle();
  const RankingResult c = exact_rank(cycle);
  CHECK(c.order == std::vector<std::size_t>{0, 1, 2});
  CHECK(path_sum(cycle, c.order) == 2);

  CHECK_THROWS_AS(exact_rank(Pdm(21)), std::invalid_argument);
}

TEST_CASE("exact rank matches enumeration including tie-break") {
  std::mt19937_64 rng(77);
  for (std::size_t n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 30; ++trial) {
      const Pdm pdm = random_pdm(rng, n);
      const auto [best, order] = enumerate_best(pdm);
      const RankingResult r = exact_rank(pdm);
      CHECK(path_sum(pdm, r.order) == best);
      CHECK(r.order == order);
    }
  }
}

TEST_CASE("exact never below greedy") {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 200; ++trial) {
    const Pdm pdm = random_pdm(rng, 10);
    CHECK(path_sum(pdm, exact_rank(pdm).order) >= path_sum(pdm, greedy_rank(pdm).order));
  }
}

TEST_CASE("consistency check") {
  CHECK(consistency_check(three_cycle()).violations == 3);
  CHECK(consistency_check(Pdm(5)).violations == 0);
  CHECK(consistency_check(Pdm(5)).wins == 0);
  const std::vector<double> scores = {0.5, 0.1, 0.9, 0.7};
  const ConsistencyReport r = consistency_check(pdm_from_scores(scores));
  CHECK(r.transitive());
  CHECK(r.wins == 6);
}

TEST_CASE("argsort is stable") {
  const std::vector<double> s = {1.0, 3.0, 1.0, 3.0};
  CHECK(argsort_descending(s) == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("mrr") {
  const RankingResult first = ranking_from_order({0, 1, 2});
  const std::vector<RankedQuery> perfect = {{first, 0}, {ranking_from_order({2, 1, 0}), 2}};
  CHECK(mrr(perfect) == 1.0);
  const std::vector<RankedQuery> mixed = {{first, 1}, {first, 2}};
  CHECK(mrr(mixed) == doctest::Approx((0.5 + 1.0 / 3.0) / 2).epsilon(1e-15));
  CHECK_THROWS(mrr(std::vector<RankedQuery>{}));
}

}  // TEST_SUITE
