#include "pairrank/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace pairrank {

namespace {

constexpr const char* kStatsHeader = "pairrank-corpus-stats";
constexpr int kStatsVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError(where + ": bad number '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(where + ": bad count '" + s + "'");
  }
  return v;
}

std::unordered_map<std::string, std::size_t> term_counts(const Tokens& doc) {
  std::unordered_map<std::string, std::size_t> tf;
  for (const std::string& t : doc) ++tf[t];
  return tf;
}

// Unique query terms in first-occurrence order, so floating-point sums do not
// depend on hash iteration order.
Tokens unique_terms(const Tokens& query) {
  Tokens out;
  std::unordered_set<std::string> seen;
  for (const std::string& t : query)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

}  // namespace

CorpusStats corpus_stats(const std::vector<Tokens>& documents) {
  CorpusStats stats;
  std::size_t total_len = 0;
  for (const Tokens& doc : documents) {
    total_len += doc.size();
    std::unordered_set<std::string> seen(doc.begin(), doc.end());
    for (const std::string& t : seen) ++stats.doc_freq[t];
  }
  stats.doc_count = documents.size();
  if (stats.doc_count > 0) {
    stats.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(stats.doc_count);
  }
  return stats;
}

void CorpusStats::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus stats " + path);
  out << kStatsHeader << '\t' << kStatsVersion << '\n';
  out << "doc_count\t" << doc_count << '\n';
  out << "avg_doc_len\t" << hex_double(avg_doc_len) << '\n';
  out << "df_entries\t" << doc_freq.size() << '\n';
  const std::map<std::string, std::size_t> sorted(doc_freq.begin(), doc_freq.end());
  for (const auto& [tok, df] : sorted) out << "df\t" << tok << '\t' << df << '\n';
  if (!out) throw DataError("failed writing corpus stats " + path);
}

CorpusStats CorpusStats::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus stats " + path);
  std::string line;
  std::size_t line_no = 0;
  auto fields_of = [&](const std::string& l) {
    std::vector<std::string> f;
    std::istringstream is(l);
    std::string part;
    while (std::getline(is, part, '\t')) f.push_back(part);
    return f;
  };
  auto where = [&] { return path + ":" + std::to_string(line_no); };

  if (!std::getline(in, line)) throw DataError(path + ": empty corpus stats file");
  ++line_no;
  auto header = fields_of(line);
  if (header.size() != 2 || header[0] != kStatsHeader) throw DataError(where() + ": not a corpus stats file");
  if (parse_count(header[1], where()) != kStatsVersion) {
    throw DataError(where() + ": unsupported corpus stats version " + header[1]);
  }
  CorpusStats stats;
  std::size_t expected_entries = 0;
  bool have_count = false, have_avg = false, have_entries = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto f = fields_of(line);
    if (f.size() == 2 && f[0] == "doc_count") {
      stats.doc_count = parse_count(f[1], where());
      have_count = true;
    } else if (f.size() == 2 && f[0] == "avg_doc_len") {
      stats.avg_doc_len = parse_double(f[1], where());
      have_avg = true;
    } else if (f.size() == 2 && f[0] == "df_entries") {
      expected_entries = parse_count(f[1], where());
      have_entries = true;
    } else if (f.size() == 3 && f[0] == "df") {
      const std::size_t df = parse_count(f[2], where());
      if (df == 0 || df > stats.doc_count) throw DataError(where() + ": df out of range");
      if (!stats.doc_freq.emplace(f[1], df).second) throw DataError(where() + ": duplicate token");
    } else {
      throw DataError(where() + ": unrecognized line");
    }
  }
  if (!have_count || !have_avg || !have_entries) throw DataError(path + ": missing header keys");
  if (stats.doc_freq.size() != expected_entries) throw DataError(path + ": truncated df table");
  return stats;
}

double bm25(const Tokens& query, const Tokens& doc, const CorpusStats& stats, double k1, double b) {
  if (stats.doc_count < 1) throw std::invalid_argument("bm25: corpus stats are empty");
  if (k1 < 0.0 || b < 0.0 || b > 1.0) throw std::invalid_argument("bm25: need k1 >= 0, 0 <= b <= 1");
  const auto tf = term_counts(doc);
  const double n_docs = static_cast<double>(stats.doc_count);
  const double relative_len =
      stats.avg_doc_len > 0.0 ? static_cast<double>(doc.size()) / stats.avg_doc_len : 1.0;
  const double length_norm = k1 * (1.0 - b + b * relative_len);
  double score = 0.0;
  for (const std::string& term : unique_terms(query)) {
    const std::size_t df = stats.df(term);
    auto it = tf.find(term);
    if (df == 0 || it == tf.end()) continue;
    const double d = static_cast<double>(df);
    const double idf = std::log(1.0 + (n_docs - d + 0.5) / (d + 0.5));
    const double f = static_cast<double>(it->second);
    score += idf * f * (k1 + 1.0) / (f + length_norm);
  }
  return score;
}

double tf_idf(const Tokens& query, const Tokens& doc, const CorpusStats& stats) {
  if (stats.doc_count < 1) throw std::invalid_argument("tf_idf: corpus stats are empty");
  const auto tf = term_counts(doc);
  const double n_docs = static_cast<double>(stats.doc_count);
  double score = 0.0;
  for (const std::string& term : unique_terms(query)) {
    const std::size_t df = stats.df(term);
    auto it = tf.find(term);
    if (df == 0 || it == tf.end()) continue;
    score += static_cast<double>(it->second) * std::log(n_docs / static_cast<double>(df));
  }
  return score;
}

NormStats NormStats::fit(const std::vector<FeatureVector>& samples) {
  NormStats norm;
  if (samples.empty()) return norm;
  const double n = static_cast<double>(samples.size());
  for (const FeatureVector& f : samples) {
    const auto a = f.as_array();
    for (std::size_t k = 0; k < kFeatureCount; ++k) norm.mean[k] += a[k];
  }
  for (double& m : norm.mean) m /= n;
  for (const FeatureVector& f : samples) {
    const auto a = f.as_array();
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      const double d = a[k] - norm.mean[k];
      norm.stddev[k] += d * d;
    }
  }
  for (double& s : norm.stddev) s = std::sqrt(s / n);
  return norm;
}

FeatureVector NormStats::apply(const FeatureVector& raw) const {
  const auto a = raw.as_array();
  std::array<double, kFeatureCount> z{};
  for (std::size_t k = 0; k < kFeatureCount; ++k)
    z[k] = stddev[k] > 0.0 ? (a[k] - mean[k]) / stddev[k] : 0.0;
  return {z[0], z[1], z[2]};
}

FeatureVector feature_vector(const Tokens& query, const Tokens& doc, const CorpusStats& stats,
                             const NormStats* norm) {
  FeatureVector raw{static_cast<double>(doc.size()), bm25(query, doc, stats), tf_idf(query, doc, stats)};
  return norm ? norm->apply(raw) : raw;
}

}  // namespace pairrank
