#include "pairrank/ranking.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pairrank/model.hpp"

namespace pairrank {

Pdm::Pdm(std::size_t n) : n_(n), r_(n * n, 0.5) {
  if (n < 2) throw std::invalid_argument("Pdm: need at least 2 documents");
}

void Pdm::set(std::size_t i, std::size_t j, double p) {
  if (i >= n_ || j >= n_ || i == j) throw std::out_of_range("Pdm::set: bad index pair");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("Pdm::set: probability outside [0, 1]");
  r_[i * n_ + j] = p;
  r_[j * n_ + i] = 1.0 - p;
}

Pdm pdm_from_scores(std::span<const double> scores) {
  Pdm pdm(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      const PairProbability p = pair_probability(scores[i], scores[j]);
      pdm.set(i, j, p.first);
    }
  }
  return pdm;
}

RankingResult ranking_from_order(std::vector<std::size_t> order) {
  RankingResult r;
  r.rank.assign(order.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (order[k] >= order.size() || r.rank[order[k]] != 0) {
      throw std::invalid_argument("ranking_from_order: not a permutation");
    }
    r.rank[order[k]] = k + 1;
  }
  r.order = std::move(order);
  return r;
}

std::vector<std::size_t> argsort_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

RankingResult greedy_rank(const Pdm& pdm) {
  const std::size_t n = pdm.size();
  std::vector<double> row_sums(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) row_sums[i] += pdm(i, j);
  return ranking_from_order(argsort_descending(row_sums));
}

RankingResult exact_rank(const Pdm& pdm) {
  const std::size_t n = pdm.size();
  if (n > kMaxExactRankSize) {
    throw std::invalid_argument("exact_rank: " + std::to_string(n) + " documents exceed the limit of " +
                                std::to_string(kMaxExactRankSize) + "; use greedy_rank");
  }
  const std::uint32_t full = (1u << n) - 1;
  // best[S * n + v]: max weight of a path that starts at v and visits exactly
  // the vertices of S (v in S). Suffix form makes lexicographic
  // reconstruction a forward greedy walk.
  constexpr std::int16_t kUnset = -1;
  std::vector<std::int16_t> best(static_cast<std::size_t>(full + 1) * n, kUnset);
  for (std::size_t v = 0; v < n; ++v) best[(std::size_t{1} << v) * n + v] = 0;
  for (std::uint32_t set = 1; set <= full; ++set) {
    if ((set & (set - 1)) == 0) continue;
    for (std::size_t v = 0; v < n; ++v) {
      if (!(set & (1u << v))) continue;
      const std::uint32_t rest = set & ~(1u << v);
      std::int16_t value = kUnset;
      for (std::size_t u = 0; u < n; ++u) {
        if (!(rest & (1u << u))) continue;
        const std::int16_t tail = best[static_cast<std::size_t>(rest) * n + u];
        value = std::max<std::int16_t>(value, static_cast<std::int16_t>(tail + pdm.wins(v, u)));
      }
      best[static_cast<std::size_t>(set) * n + v] = value;
    }
  }
  std::int16_t optimum = kUnset;
  for (std::size_t v = 0; v < n; ++v) optimum = std::max(optimum, best[static_cast<std::size_t>(full) * n + v]);

  std::vector<std::size_t> order;
  std::uint32_t set = full;
  std::size_t current = 0;
  while (best[static_cast<std::size_t>(full) * n + current] != optimum) ++current;
  order.push_back(current);
  while (set != (1u << current)) {
    const std::int16_t here = best[static_cast<std::size_t>(set) * n + current];
    const std::uint32_t rest = set & ~(1u << current);
    std::size_t next = 0;
    for (; next < n; ++next) {
      if (!(rest & (1u << next))) continue;
      if (best[static_cast<std::size_t>(rest) * n + next] + pdm.wins(current, next) == here) break;
    }
    order.push_back(next);
    set = rest;
    current = next;
  }
  return ranking_from_order(std::move(order));
}

int path_sum(const Pdm& pdm, std::span<const std::size_t> order) {
  int total = 0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) total += pdm.wins(order[k], order[k + 1]);
  return total;
}

ConsistencyReport consistency_check(const Pdm& pdm) {
  const std::size_t n = pdm.size();
  ConsistencyReport report;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !pdm.wins(i, j)) continue;
      ++report.wins;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        if (pdm.wins(j, k) && !pdm.wins(i, k)) ++report.violations;
      }
    }
  }
  return report;
}

double reciprocal_rank(const RankingResult& ranking, std::size_t gold_index) {
  if (gold_index >= ranking.rank.size()) throw std::out_of_range("reciprocal_rank: gold index out of range");
  return 1.0 / static_cast<double>(ranking.rank[gold_index]);
}

double mrr(std::span<const RankedQuery> results) {
  if (results.empty()) throw std::invalid_argument("mrr: no queries");
  double total = 0.0;
  for (const RankedQuery& r : results) total += reciprocal_rank(r.ranking, r.gold_index);
  return total / static_cast<double>(results.size());
}

}  // namespace pairrank
