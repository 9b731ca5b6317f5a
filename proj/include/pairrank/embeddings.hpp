#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pairrank {

enum class BankRole { Word2Vec, GloVe, FastText };

std::string_view role_name(BankRole role);

// A fixed table of word vectors. Never trained; lives outside the tape.
class EmbeddingBank {
 public:
  EmbeddingBank() = default;
  EmbeddingBank(BankRole role, std::size_t dim) : role_(role), dim_(dim) {}

  // Text format: `token v1 ... v_dim` per line. dim is taken from the first
  // line. Throws DataError with the offending line number.
  static EmbeddingBank load(const std::string& path, BankRole role);
  // Same format keyed by character n-gram. FastText role only.
  void load_subwords(const std::string& path);

  void add(const std::string& token, std::vector<double> vec);
  void add_subword(const std::string& ngram, std::vector<double> vec);
  void save(const std::string& path) const;
  void save_subwords(const std::string& path) const;

  // Stored vector, or the role's OOV fallback: zeros for Word2Vec/GloVe, the
  // mean of the known character 3..6-grams of "<token>" for FastText.
  std::vector<double> lookup(const std::string& token) const;
  // OOV path only, regardless of whether token is stored.
  std::vector<double> oov_vector(const std::string& token) const;

  BankRole role() const { return role_; }
  // 0 until the first vector is added.
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  std::size_t subword_count() const { return subwords_.size(); }
  bool contains(const std::string& token) const { return vectors_.count(token) > 0; }

 private:
  void check_dim(std::size_t got, const std::string& what);

  BankRole role_ = BankRole::Word2Vec;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::unordered_map<std::string, std::vector<double>> subwords_;
  std::vector<std::string> order_;
  std::vector<std::string> subword_order_;
};

// Character n-grams of "<word>" for n in [min_n, max_n], by length then
// position. Operates on UTF-8 code points.
std::vector<std::string> char_ngrams(const std::string& word, std::size_t min_n = 3,
                                     std::size_t max_n = 6);

// The three banks in (Word2Vec, GloVe, FastText) order, sharing one dim.
class EmbeddingSet {
 public:
  EmbeddingSet(EmbeddingBank w2v, EmbeddingBank glove, EmbeddingBank fasttext);

  std::array<std::vector<double>, 3> triple_lookup(const std::string& token) const;
  // Lookup for a token the corpus vocabulary maps to id 0: Word2Vec and GloVe
  // rows are zero, FastText keeps its subword fallback.
  std::array<std::vector<double>, 3> oov_lookup(const std::string& token) const;

  std::size_t dim() const { return dim_; }
  const EmbeddingBank& bank(std::size_t j) const { return banks_.at(j); }

 private:
  std::array<EmbeddingBank, 3> banks_;
  std::size_t dim_ = 0;
};

}  // namespace pairrank
