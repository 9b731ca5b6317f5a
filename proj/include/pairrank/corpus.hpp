#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace pairrank {

using Tokens = std::vector<std::string>;

// Malformed input file content. Messages carry the file line number.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kPassagesPerQuery = 10;
inline constexpr std::size_t kDefaultMinFrequency = 3;
inline constexpr std::size_t kDefaultQueryCapacity = 15;
inline constexpr std::size_t kDefaultDocCapacity = 70;

// The shipped 179-word English stopword list.
const std::unordered_set<std::string>& english_stopwords();
std::unordered_set<std::string> load_stopwords(const std::string& path);

// Lowercases, splits on whitespace, trims punctuation from both ends of each
// piece and drops pieces that end up empty or are stopwords.
Tokens tokenize(std::string_view text);
Tokens tokenize(std::string_view text, const std::unordered_set<std::string>& stopwords);

// Lowercase a UTF-8 string (ASCII, Latin-1, Latin Extended-A, Greek and
// Cyrillic capitals). Invalid byte sequences pass through unchanged.
std::string utf8_lower(std::string_view text);

class Vocabulary {
 public:
  // Id 0 is reserved for out-of-vocabulary tokens and padding.
  static constexpr std::uint32_t kUnknownId = 0;

  Vocabulary() = default;

  // Keeps tokens seen at least min_frequency times. Ids are assigned in
  // descending frequency, ties broken lexicographically, starting at 1.
  static Vocabulary build(const std::vector<Tokens>& corpus,
                          std::size_t min_frequency = kDefaultMinFrequency);
  static Vocabulary from_counts(const std::map<std::string, std::size_t>& counts,
                                std::size_t min_frequency = kDefaultMinFrequency);

  std::uint32_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }
  const std::string& token(std::uint32_t id) const { return id_to_token_.at(id - 1); }
  std::size_t frequency(std::uint32_t id) const { return frequencies_.at(id - 1); }
  std::size_t size() const { return id_to_token_.size(); }
  std::size_t min_frequency() const { return min_frequency_; }

  // TSV: token<TAB>id<TAB>frequency, in id order.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
  // FNV-1a over the serialized form; stored in checkpoints.
  std::uint64_t fingerprint() const;

  bool operator==(const Vocabulary& o) const {
    return id_to_token_ == o.id_to_token_ && frequencies_ == o.frequencies_ &&
           min_frequency_ == o.min_frequency_;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::size_t> frequencies_;
  std::size_t min_frequency_ = kDefaultMinFrequency;
};

struct EncodedSequence {
  std::vector<std::uint32_t> ids;  // capacity entries, 0-padded
  std::size_t length = 0;          // real tokens before padding
  Tokens raw_tokens;               // the kept window, for subword fallback
};

// Keeps the first min(len, capacity) tokens.
EncodedSequence encode(const Tokens& tokens, const Vocabulary& vocab, std::size_t capacity);

struct QuerySample {
  std::string query_id;
  Tokens query_tokens;
  std::vector<Tokens> passages;
  std::optional<std::size_t> gold_index;
};

// Streams QuerySamples from the dataset TSV:
//   query_id<TAB>query_text<TAB>passage_text<TAB>label<TAB>passage_index
// Rows of one query are contiguous. Only one query group is held in memory.
class DatasetReader {
 public:
  DatasetReader(const std::string& path, bool labeled,
                std::size_t passages_per_query = kPassagesPerQuery);
  DatasetReader(std::unique_ptr<std::istream> in, bool labeled,
                std::size_t passages_per_query = kPassagesPerQuery,
                std::string source_name = "<stream>");

  // Next query group, or nullopt at end of input. Throws DataError.
  std::optional<QuerySample> next();

 private:
  struct Row {
    std::string query_id;
    std::string query_text;
    std::string passage_text;
    int label = 0;
    std::size_t line = 0;
  };
  std::optional<Row> read_row();
  QuerySample finish_group(std::vector<Row>& rows);

  std::unique_ptr<std::istream> in_;
  std::string source_;
  bool labeled_;
  std::size_t per_query_;
  std::size_t line_ = 0;
  std::optional<Row> pending_;
  std::unordered_set<std::string> seen_ids_;
};

std::vector<QuerySample> load_dataset(const std::string& path, bool labeled,
                                      std::size_t passages_per_query = kPassagesPerQuery);

struct TrainDevSplit {
  std::vector<QuerySample> train;
  std::vector<QuerySample> dev;
};

// Seeded random split. Both halves preserve the input order.
TrainDevSplit split_train_dev(const std::vector<QuerySample>& dataset, std::size_t dev_count,
                              std::uint64_t seed);

}  // namespace pairrank
