#include "pairrank/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "pairrank/rng.hpp"

namespace pairrank {

namespace detail {
extern const std::string_view kEnglishStopwordsText;
}

namespace {

// Decodes one UTF-8 code point starting at text[pos]. On malformed input
// returns the single byte as its own "code point" with length 1.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view text, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= text.size()) return -1;
    const auto b = static_cast<unsigned char>(text[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
  }
  return {b0, 1};
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t lower_code_point(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x138 && cp != 0x149) {
    // Latin Extended-A alternates upper/lower, with a parity shift at U+0139.
    const bool shifted = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    const bool upper = shifted ? (cp % 2 == 1) : (cp % 2 == 0);
    if (upper) return cp + 1;
    return cp;
  }
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

bool is_space(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\v' ||
         cp == U'\f' || cp == 0xA0 || cp == 0x2009 || cp == 0x200B || cp == 0x3000;
}

bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  switch (cp) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
    case 0x2018: case 0x2019: case 0x201A: case 0x201B:
    case 0x201C: case 0x201D: case 0x201E: case 0x201F:
    case 0x2020: case 0x2021: case 0x2022: case 0x2026: case 0x2032: case 0x2033:
    case 0x3001: case 0x3002:
      return true;
    default:
      return false;
  }
}

std::string_view trim_punct(std::string_view token) {
  std::size_t begin = 0;
  while (begin < token.size()) {
    auto [cp, len] = decode_utf8(token, begin);
    if (!is_punct(cp)) break;
    begin += len;
  }
  std::size_t end = token.size();
  while (end > begin) {
    // Walk back to the start of the previous code point.
    std::size_t start = end - 1;
    while (start > begin && (static_cast<unsigned char>(token[start]) & 0xC0) == 0x80) --start;
    auto [cp, len] = decode_utf8(token, start);
    if (start + len != end || !is_punct(cp)) break;
    end = start;
  }
  return token.substr(begin, end - begin);
}

std::unordered_set<std::string> parse_stopwords(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

// ---- tokenization ---------------------------------------------------------

const std::unordered_set<std::string>& english_stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::istringstream in{std::string(detail::kEnglishStopwordsText)};
    return parse_stopwords(in);
  }();
  return words;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stopword file " + path);
  return parse_stopwords(in);
}

std::string utf8_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto [cp, len] = decode_utf8(text, pos);
    if (len == 1 && static_cast<unsigned char>(text[pos]) >= 0x80) {
      out.push_back(text[pos]);  // malformed byte, copied verbatim
    } else {
      append_utf8(out, lower_code_point(cp));
    }
    pos += len;
  }
  return out;
}

Tokens tokenize(std::string_view text) { return tokenize(text, english_stopwords()); }

Tokens tokenize(std::string_view text, const std::unordered_set<std::string>& stopwords) {
  const std::string lowered = utf8_lower(text);
  const std::string_view view(lowered);
  Tokens tokens;
  std::size_t pos = 0;
  std::size_t piece_start = std::string_view::npos;
  auto flush = [&](std::size_t end) {
    if (piece_start == std::string_view::npos) return;
    const std::string_view piece = trim_punct(view.substr(piece_start, end - piece_start));
    piece_start = std::string_view::npos;
    if (piece.empty()) return;
    std::string token(piece);
    if (!stopwords.count(token)) tokens.push_back(std::move(token));
  };
  while (pos < view.size()) {
    auto [cp, len] = decode_utf8(view, pos);
    if (is_space(cp)) {
      flush(pos);
    } else if (piece_start == std::string_view::npos) {
      piece_start = pos;
    }
    pos += len;
  }
  flush(view.size());
  return tokens;
}

// ---- vocabulary -----------------------------------------------------------

Vocabulary Vocabulary::build(const std::vector<Tokens>& corpus, std::size_t min_frequency) {
  std::map<std::string, std::size_t> counts;
  for (const Tokens& seq : corpus)
    for (const std::string& tok : seq) ++counts[tok];
  return from_counts(counts, min_frequency);
}

Vocabulary Vocabulary::from_counts(const std::map<std::string, std::size_t>& counts,
                                   std::size_t min_frequency) {
  if (min_frequency < 1) throw std::invalid_argument("min_frequency must be >= 1");
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_frequency) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_frequency_ = min_frequency;
  for (auto& [tok, n] : kept) {
    v.id_to_token_.push_back(tok);
    v.frequencies_.push_back(n);
    v.token_to_id_.emplace(std::move(tok), static_cast<std::uint32_t>(v.id_to_token_.size()));
  }
  return v;
}

std::uint32_t Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnknownId : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path);
  out << "#min_frequency\t" << min_frequency_ << '\n';
  for (std::size_t i = 0; i < id_to_token_.size(); ++i)
    out << id_to_token_[i] << '\t' << (i + 1) << '\t' << frequencies_[i] << '\n';
  if (!out) throw DataError("failed writing vocabulary " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary " + path);
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_tabs(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (line_no == 1 && fields.size() == 2 && fields[0] == "#min_frequency") {
      if (!parse_int(fields[1], v.min_frequency_) || v.min_frequency_ < 1) {
        throw DataError(where + ": bad min_frequency");
      }
      continue;
    }
    std::uint32_t id = 0;
    std::size_t freq = 0;
    if (fields.size() != 3 || !parse_int(fields[1], id) || !parse_int(fields[2], freq)) {
      throw DataError(where + ": expected token<TAB>id<TAB>frequency");
    }
    if (id != v.id_to_token_.size() + 1) throw DataError(where + ": ids must be dense from 1");
    std::string tok(fields[0]);
    if (!v.token_to_id_.emplace(tok, id).second) throw DataError(where + ": duplicate token");
    v.id_to_token_.push_back(std::move(tok));
    v.frequencies_.push_back(freq);
  }
  return v;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = fnv1a(std::to_string(min_frequency_));
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    h = fnv1a(id_to_token_[i], h);
    h = fnv1a("\t" + std::to_string(frequencies_[i]) + "\n", h);
  }
  return h;
}

EncodedSequence encode(const Tokens& tokens, const Vocabulary& vocab, std::size_t capacity) {
  if (capacity < 1) throw std::invalid_argument("encode: capacity must be >= 1");
  EncodedSequence seq;
  seq.length = std::min(tokens.size(), capacity);
  seq.ids.assign(capacity, Vocabulary::kUnknownId);
  seq.raw_tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(seq.length));
  for (std::size_t i = 0; i < seq.length; ++i) seq.ids[i] = vocab.id(tokens[i]);
  return seq;
}

// ---- dataset --------------------------------------------------------------

DatasetReader::DatasetReader(const std::string& path, bool labeled, std::size_t passages_per_query)
    : DatasetReader(std::make_unique<std::ifstream>(path, std::ios::binary), labeled,
                    passages_per_query, path) {}

DatasetReader::DatasetReader(std::unique_ptr<std::istream> in, bool labeled,
                             std::size_t passages_per_query, std::string source_name)
    : in_(std::move(in)), source_(std::move(source_name)), labeled_(labeled),
      per_query_(passages_per_query) {
  if (!in_ || !*in_) throw DataError("cannot open dataset " + source_);
  if (per_query_ < 1) throw std::invalid_argument("passages_per_query must be >= 1");
}

std::optional<DatasetReader::Row> DatasetReader::read_row() {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string where = source_ + ":" + std::to_string(line_);
    if (fields.size() != 5) {
      throw DataError(where + ": expected 5 tab-separated fields, found " +
                      std::to_string(fields.size()));
    }
    Row row;
    row.query_id = std::string(fields[0]);
    row.query_text = std::string(fields[1]);
    row.passage_text = std::string(fields[2]);
    row.line = line_;
    if (row.query_id.empty()) throw DataError(where + ": empty query_id");
    std::size_t passage_index = 0;
    if (!parse_int(fields[4], passage_index)) {
      throw DataError(where + ": passage_index is not a non-negative integer");
    }
    if (labeled_) {
      if (fields[3] == "0") {
        row.label = 0;
      } else if (fields[3] == "1") {
        row.label = 1;
      } else {
        throw DataError(where + ": label must be 0 or 1");
      }
    }
    return row;
  }
  return std::nullopt;
}

QuerySample DatasetReader::finish_group(std::vector<Row>& rows) {
  const Row& first = rows.front();
  const std::string where = source_ + ":" + std::to_string(first.line);
  if (rows.size() != per_query_) {
    throw DataError(where + ": query '" + first.query_id + "': expected " +
                    std::to_string(per_query_) + " passages, found " + std::to_string(rows.size()));
  }
  if (!seen_ids_.insert(first.query_id).second) {
    throw DataError(where + ": query '" + first.query_id + "' rows are not contiguous");
  }
  QuerySample sample;
  sample.query_id = first.query_id;
  sample.query_tokens = tokenize(first.query_text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sample.passages.push_back(tokenize(rows[i].passage_text));
    if (labeled_ && rows[i].label == 1) {
      if (sample.gold_index) {
        throw DataError(source_ + ":" + std::to_string(rows[i].line) + ": query '" +
                        first.query_id + "' has multiple gold labels");
      }
      sample.gold_index = i;
    }
  }
  if (labeled_ && !sample.gold_index) {
    throw DataError(where + ": query '" + first.query_id + "' has no gold label");
  }
  return sample;
}

std::optional<QuerySample> DatasetReader::next() {
  std::vector<Row> rows;
  if (pending_) {
    rows.push_back(std::move(*pending_));
    pending_.reset();
  } else if (auto row = read_row()) {
    rows.push_back(std::move(*row));
  } else {
    return std::nullopt;
  }
  while (auto row = read_row()) {
    if (row->query_id != rows.front().query_id) {
      pending_ = std::move(row);
      break;
    }
    rows.push_back(std::move(*row));
  }
  return finish_group(rows);
}

std::vector<QuerySample> load_dataset(const std::string& path, bool labeled,
                                      std::size_t passages_per_query) {
  DatasetReader reader(path, labeled, passages_per_query);
  std::vector<QuerySample> samples;
  while (auto s = reader.next()) samples.push_back(std::move(*s));
  return samples;
}

TrainDevSplit split_train_dev(const std::vector<QuerySample>& dataset, std::size_t dev_count,
                              std::uint64_t seed) {
  if (dev_count >= dataset.size()) {
    throw std::invalid_argument("split_train_dev: dev_count " + std::to_string(dev_count) +
                                " must be smaller than dataset size " +
                                std::to_string(dataset.size()));
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  shuffle(order, rng);
  std::vector<bool> in_dev(dataset.size(), false);
  for (std::size_t i = 0; i < dev_count; ++i) in_dev[order[i]] = true;
  TrainDevSplit split;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    (in_dev[i] ? split.dev : split.train).push_back(dataset[i]);
  return split;
}

}  // namespace pairrank
