#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pairrank {

// Probability Distribution Matrix: entry (i, j) is the probability that
// document i beats document j. Off-diagonal pairs sum to 1; the diagonal is
// fixed at 0.5.
class Pdm {
 public:
  explicit Pdm(std::size_t n);

  // Sets (i, j) to p and (j, i) to 1 - p.
  void set(std::size_t i, std::size_t j, double p);
  double operator()(std::size_t i, std::size_t j) const { return r_[i * n_ + j]; }
  std::size_t size() const { return n_; }

  // Edge weight of the tournament graph: 1 when i strictly beats j.
  int wins(std::size_t i, std::size_t j) const { return (*this)(i, j) > (*this)(j, i) ? 1 : 0; }

 private:
  std::size_t n_;
  std::vector<double> r_;
};

// PDM from per-document scores: R(i, j) = sigmoid(s_i - s_j), each pair
// evaluated once through pair_probability so antisymmetry is exact.
Pdm pdm_from_scores(std::span<const double> scores);

struct RankingResult {
  std::vector<std::size_t> rank;   // rank[i] in 1..n, 1 = best
  std::vector<std::size_t> order;  // order[k] = document placed at rank k + 1
};

RankingResult ranking_from_order(std::vector<std::size_t> order);

// Row sums, sorted descending, lower index first on ties.
RankingResult greedy_rank(const Pdm& pdm);

inline constexpr std::size_t kMaxExactRankSize = 20;

// Maximum-weight Hamiltonian path over the 0/1 tournament edges by subset DP,
// O(n^2 2^n). Among optimal paths the lexicographically smallest vertex
// sequence wins. Throws std::invalid_argument for n > kMaxExactRankSize.
RankingResult exact_rank(const Pdm& pdm);

// Sum of tournament edge weights along consecutive positions of order.
int path_sum(const Pdm& pdm, std::span<const std::size_t> order);

struct ConsistencyReport {
  std::size_t violations = 0;  // ordered (i, j, k) with i>j, j>k but not i>k
  std::size_t wins = 0;        // directed edges with weight 1
  bool transitive() const { return violations == 0; }
};

ConsistencyReport consistency_check(const Pdm& pdm);

// Descending argsort of scores, lower index first on ties.
std::vector<std::size_t> argsort_descending(std::span<const double> scores);

struct RankedQuery {
  RankingResult ranking;
  std::size_t gold_index = 0;
};

double reciprocal_rank(const RankingResult& ranking, std::size_t gold_index);
// Mean of 1 / rank[gold]. Throws on an empty input.
double mrr(std::span<const RankedQuery> results);

}  // namespace pairrank
