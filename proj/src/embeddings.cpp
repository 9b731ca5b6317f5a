#include "pairrank/embeddings.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pairrank/corpus.hpp"

namespace pairrank {

namespace {

using VectorTable = std::unordered_map<std::string, std::vector<double>>;

// Parses `key v1 ... vd` lines. Calls add(key, values, line_no) per line.
template <typename Add>
void read_vector_file(const std::string& path, Add&& add) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vector file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size() || !std::isfinite(v)) {
        throw DataError(where + ": non-numeric field '" + field + "'");
      }
      values.push_back(v);
    }
    if (values.empty()) throw DataError(where + ": no vector components");
    try {
      add(key, std::move(values));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
}

void write_vector_file(const std::string& path, const std::vector<std::string>& order,
                       const VectorTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vector file " + path);
  char buf[40];
  for (const std::string& key : order) {
    out << key;
    for (double v : table.at(key)) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing vector file " + path);
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

}  // namespace

std::string_view role_name(BankRole role) {
  switch (role) {
    case BankRole::Word2Vec:
      return "w2v";
    case BankRole::GloVe:
      return "glove";
    case BankRole::FastText:
      return "fasttext";
  }
  return "?";
}

std::vector<std::string> char_ngrams(const std::string& word, std::size_t min_n, std::size_t max_n) {
  const std::string wrapped = "<" + word + ">";
  std::vector<std::size_t> starts;  // byte offset of every code point, plus end
  for (std::size_t pos = 0; pos < wrapped.size();) {
    starts.push_back(pos);
    pos += utf8_length(static_cast<unsigned char>(wrapped[pos]));
  }
  const std::size_t cps = starts.size();
  starts.push_back(wrapped.size());
  std::vector<std::string> grams;
  for (std::size_t n = min_n; n <= max_n; ++n) {
    for (std::size_t i = 0; i + n <= cps; ++i) {
      grams.push_back(wrapped.substr(starts[i], std::min(starts[i + n], wrapped.size()) - starts[i]));
    }
  }
  return grams;
}

void EmbeddingBank::check_dim(std::size_t got, const std::string& what) {
  if (dim_ == 0) {
    dim_ = got;
  } else if (got != dim_) {
    throw DataError(what + " has " + std::to_string(got) + " components, expected " +
                    std::to_string(dim_));
  }
}

void EmbeddingBank::add(const std::string& token, std::vector<double> vec) {
  check_dim(vec.size(), "vector for '" + token + "'");
  if (vectors_.count(token)) throw DataError("duplicate token '" + token + "'");
  order_.push_back(token);
  vectors_.emplace(token, std::move(vec));
}

void EmbeddingBank::add_subword(const std::string& ngram, std::vector<double> vec) {
  if (role_ != BankRole::FastText) {
    throw std::logic_error("subword vectors are only supported for the fasttext role");
  }
  check_dim(vec.size(), "subword vector for '" + ngram + "'");
  if (subwords_.count(ngram)) throw DataError("duplicate n-gram '" + ngram + "'");
  subword_order_.push_back(ngram);
  subwords_.emplace(ngram, std::move(vec));
}

EmbeddingBank EmbeddingBank::load(const std::string& path, BankRole role) {
  EmbeddingBank bank(role, 0);
  read_vector_file(path, [&](const std::string& key, std::vector<double> values) {
    bank.add(key, std::move(values));
  });
  return bank;
}

void EmbeddingBank::load_subwords(const std::string& path) {
  if (role_ != BankRole::FastText) {
    throw std::logic_error("subword vectors are only supported for the fasttext role");
  }
  read_vector_file(path, [&](const std::string& key, std::vector<double> values) {
    add_subword(key, std::move(values));
  });
}

void EmbeddingBank::save(const std::string& path) const { write_vector_file(path, order_, vectors_); }

void EmbeddingBank::save_subwords(const std::string& path) const {
  write_vector_file(path, subword_order_, subwords_);
}

std::vector<double> EmbeddingBank::lookup(const std::string& token) const {
  auto it = vectors_.find(token);
  if (it != vectors_.end()) return it->second;
  return oov_vector(token);
}

std::vector<double> EmbeddingBank::oov_vector(const std::string& token) const {
  std::vector<double> out(dim_, 0.0);
  if (role_ != BankRole::FastText || subwords_.empty()) return out;
  std::size_t hits = 0;
  for (const std::string& gram : char_ngrams(token)) {
    auto it = subwords_.find(gram);
    if (it == subwords_.end()) continue;
    ++hits;
    for (std::size_t k = 0; k < dim_; ++k) out[k] += it->second[k];
  }
  if (hits > 0) {
    for (double& v : out) v /= static_cast<double>(hits);
  }
  return out;
}

EmbeddingSet::EmbeddingSet(EmbeddingBank w2v, EmbeddingBank glove, EmbeddingBank fasttext)
    : banks_{std::move(w2v), std::move(glove), std::move(fasttext)} {
  const BankRole expected[3] = {BankRole::Word2Vec, BankRole::GloVe, BankRole::FastText};
  for (std::size_t j = 0; j < 3; ++j) {
    if (banks_[j].role() != expected[j]) {
      throw std::invalid_argument("EmbeddingSet: bank " + std::to_string(j) + " must have role " +
                                  std::string(role_name(expected[j])));
    }
    const std::size_t d = banks_[j].dim();
    if (d == 0) continue;
    if (dim_ == 0) {
      dim_ = d;
    } else if (d != dim_) {
      throw DataError("EmbeddingSet: bank dims differ (" + std::to_string(dim_) + " vs " +
                      std::to_string(d) + " for " + std::string(role_name(expected[j])) + ")");
    }
  }
  // Empty banks take the common dim so their OOV zeros line up.
  for (EmbeddingBank& b : banks_)
    if (b.dim() == 0) b = EmbeddingBank(b.role(), dim_);
}

std::array<std::vector<double>, 3> EmbeddingSet::triple_lookup(const std::string& token) const {
  return {banks_[0].lookup(token), banks_[1].lookup(token), banks_[2].lookup(token)};
}

std::array<std::vector<double>, 3> EmbeddingSet::oov_lookup(const std::string& token) const {
  return {std::vector<double>(dim_, 0.0), std::vector<double>(dim_, 0.0), banks_[2].lookup(token)};
}

}  // namespace pairrank
