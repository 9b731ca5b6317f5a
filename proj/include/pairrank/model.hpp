#pragma once

// The pairwise scoring network:
//
//   meta_embed      per-token softmax-weighted average of the three
//                   embedding banks, attention logits W.x + b shared by
//                   query and documents
//   encode          shared 2-layer bidirectional LSTM, then a trainable
//                   sentinel column per side
//   coattend        affinity L = D^T Q, column softmaxes in both directions,
//                   contexts C^Q = D A^Q and C^D = [Q; C^Q] A^D, then a
//                   fusion bi-LSTM over [d_i; c^D_i] for the real document
//                   positions
//   score_document  max-pool over the fusion outputs, prepend the three
//                   hand-crafted features, linear score
//
// Two document scores become a pair probability through a 2-way softmax.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pairrank/corpus.hpp"
#include "pairrank/embeddings.hpp"
#include "pairrank/features.hpp"
#include "pairrank/tensor.hpp"

namespace pairrank {

struct ModelConfig {
  std::size_t embed_dim = 300;
  std::size_t hidden = 500;
  std::size_t lstm_layers = 2;
  double dropout = 0.2;
  std::size_t max_query_len = kDefaultQueryCapacity;
  std::size_t max_doc_len = kDefaultDocCapacity;
  std::size_t feature_count = kFeatureCount;
  double init_range = 0.01;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class LstmStack { Encoder, Fusion };
enum class Side { Query, Document };

// All trainable arrays, in a fixed slot order derived from the config.
class ModelParams {
 public:
  // Uniform in [-init_range, init_range] for every entry.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  static ModelParams zeros(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::size_t count() const { return values_.size(); }
  const std::string& name(std::size_t slot) const { return names_.at(slot); }
  Matrix& value(std::size_t slot) { return values_.at(slot); }
  const Matrix& value(std::size_t slot) const { return values_.at(slot); }
  std::vector<Matrix>& values() { return values_; }
  const std::vector<Matrix>& values() const { return values_; }
  std::size_t slot(const std::string& name) const;
  Matrix& operator[](const std::string& name) { return values_.at(slot(name)); }
  const Matrix& operator[](const std::string& name) const { return values_.at(slot(name)); }

  // Zero matrices shaped like every parameter.
  std::vector<Matrix> zero_grads() const;
  std::size_t total_size() const;

  // Slot of one LSTM direction's weights: W (4h x in), U (4h x h), b (4h x 1).
  struct LstmSlots {
    std::size_t w, u, b;
  };
  LstmSlots lstm(LstmStack stack, std::size_t layer, bool backward) const;
  std::size_t attn_w() const { return 0; }
  std::size_t attn_b() const { return 1; }
  std::size_t sentinel(Side side) const;
  std::size_t out_w() const { return values_.size() - 2; }
  std::size_t out_b() const { return values_.size() - 1; }

  bool operator==(const ModelParams& o) const {
    return config_ == o.config_ && names_ == o.names_ && values_ == o.values_;
  }

 private:
  explicit ModelParams(const ModelConfig& config);

  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

// Parameters bound onto one tape. With track_grads the leaves record
// gradients into their slots; otherwise they are plain references.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ModelParams& params, bool track_grads);

  Tape& tape() const { return *tape_; }
  const ModelParams& params() const { return *params_; }
  const ModelConfig& config() const { return params_->config(); }
  Var operator[](std::size_t slot) const { return vars_.at(slot); }

 private:
  Tape* tape_;
  const ModelParams* params_;
  std::vector<Var> vars_;
};

struct ForwardMode {
  bool train = false;
  std::mt19937_64* rng = nullptr;  // required when train && dropout > 0
};

// The three bank matrices for one sequence, each embed_dim x capacity.
// Columns at or beyond length are padding and hold zeros.
struct EmbeddedSequence {
  std::array<Matrix, 3> banks;
  std::size_t length = 0;
};

// Looks up every kept token. Tokens whose vocabulary id is 0 get zero
// Word2Vec/GloVe rows and the FastText subword fallback. A sequence with no
// tokens becomes a single all-zero position.
EmbeddedSequence embed_sequence(const EncodedSequence& seq, const EmbeddingSet& banks);

// embed_dim x cols: softmax over the three banks per position, using the
// shared attention parameters.
Var meta_embed(const BoundParams& p, const EmbeddedSequence& seq);

// Runs one bidirectional LSTM stack over every column of input and returns
// 2h x T (forward states on top, backward below).
Var run_bilstm(const BoundParams& p, LstmStack stack, Var input, const ForwardMode& mode);

// 2h x (cols + 1): LSTM over the first `length` columns, zero columns for
// padding, then the side's sentinel.
Var encode(const BoundParams& p, Var meta, std::size_t length, Side side, const ForwardMode& mode);

struct CoattentionOutput {
  Var affinity;        // L, (m+1) x (n+1)
  Var attn_query;      // A^Q, (m+1) x (n+1), columns sum to 1
  Var attn_doc;        // A^D, (n+1) x (m+1), columns sum to 1
  Var context_query;   // C^Q, 2h x (n+1)
  Var context_doc;     // C^D, 4h x (m+1)
  Var fused;           // U, 2h x doc_length
};

CoattentionOutput coattend(const BoundParams& p, Var query, std::size_t query_length, Var doc,
                           std::size_t doc_length, const ForwardMode& mode);

// out_W . [length; bm25; tf_idf; maxpool(U)] + out_b, as a 1x1 node.
Var score_document(const BoundParams& p, Var fused, const FeatureVector& feats);

struct PairProbability {
  double first = 0.5;
  double second = 0.5;
};

// 2-way softmax of two scores. The smaller probability is computed directly
// and the larger as its complement, so the pair sums to 1 and swapping the
// inputs swaps the outputs bit-for-bit.
PairProbability pair_probability(double score1, double score2);

// One document ready to score against a query.
struct DocumentInput {
  EmbeddedSequence tokens;
  FeatureVector features;
};

// Query-side activations reused across every document of the query.
struct EncodedQuery {
  Var encoded;
  std::size_t length = 0;
};

EncodedQuery encode_query(const BoundParams& p, const EmbeddedSequence& query, const ForwardMode& mode);
Var score_against(const BoundParams& p, const EncodedQuery& query, const DocumentInput& doc,
                  const ForwardMode& mode);

struct PairForward {
  Var score1;
  Var score2;
  PairProbability prob;
};

// Full forward pass for <q, d1, d2>. The query is encoded once and shared by
// both branches.
PairForward forward_pair(const BoundParams& p, const EmbeddedSequence& query,
                         const DocumentInput& doc1, const DocumentInput& doc2,
                         const ForwardMode& mode);

// Eval-mode scores of every document for one query.
std::vector<double> score_documents(const ModelParams& params, const EmbeddedSequence& query,
                                    const std::vector<DocumentInput>& docs);

}  // namespace pairrank
