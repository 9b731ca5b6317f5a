#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "pairrank/corpus.hpp"

namespace pairrank {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr std::size_t kFeatureCount = 3;

// Document-frequency table and length statistics of a passage collection.
struct CorpusStats {
  std::size_t doc_count = 0;
  std::unordered_map<std::string, std::size_t> doc_freq;
  double avg_doc_len = 0.0;

  std::size_t df(const std::string& token) const {
    auto it = doc_freq.find(token);
    return it == doc_freq.end() ? 0 : it->second;
  }

  // Versioned key-value text file. Values are written with %a hex floats so a
  // reload is bit-exact.
  void save(const std::string& path) const;
  static CorpusStats load(const std::string& path);

  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const std::vector<Tokens>& documents);

// Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Query terms are
// de-duplicated; terms absent from the collection contribute nothing.
double bm25(const Tokens& query, const Tokens& doc, const CorpusStats& stats,
            double k1 = kBm25K1, double b = kBm25B);

// sum over unique query terms of tf(t, doc) * ln(N / df(t)).
double tf_idf(const Tokens& query, const Tokens& doc, const CorpusStats& stats);

struct FeatureVector {
  double length = 0.0;
  double bm25 = 0.0;
  double tf_idf = 0.0;

  std::array<double, kFeatureCount> as_array() const { return {length, bm25, tf_idf}; }
  bool operator==(const FeatureVector&) const = default;
};

// Per-component mean / standard deviation for z-scoring.
struct NormStats {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};

  static NormStats fit(const std::vector<FeatureVector>& samples);
  FeatureVector apply(const FeatureVector& raw) const;
  bool operator==(const NormStats&) const = default;
};

FeatureVector feature_vector(const Tokens& query, const Tokens& doc, const CorpusStats& stats,
                             const NormStats* norm = nullptr);

}  // namespace pairrank
