#include "pairrank/model.hpp"

#include <cmath>
#include <stdexcept>

#include "pairrank/rng.hpp"

namespace pairrank {

namespace {

std::string stack_name(LstmStack stack) { return stack == LstmStack::Encoder ? "enc" : "fusion"; }

std::size_t stack_input_dim(const ModelConfig& c, LstmStack stack) {
  return stack == LstmStack::Encoder ? c.embed_dim : 6 * c.hidden;
}

// Row-major mask over an (rows x cols) matrix hiding rows [valid, rows - 1):
// the padding rows between the real positions and the trailing sentinel.
std::vector<bool> padding_row_mask(std::size_t rows, std::size_t cols, std::size_t valid) {
  std::vector<bool> mask(rows * cols, false);
  for (std::size_t r = valid; r + 1 < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) mask[r * cols + c] = true;
  return mask;
}

// One direction of one LSTM layer, gate order (i, f, g, o).
Var run_lstm_direction(const BoundParams& p, const ModelParams::LstmSlots& slots, Var input,
                       bool backward) {
  const std::size_t h = p.config().hidden;
  const std::size_t steps = input.cols();
  const Var projected = add_broadcast(matmul(p[slots.w], input), p[slots.b]);
  std::vector<Var> outputs(steps);
  Var hidden, cell;
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = backward ? steps - 1 - k : k;
    Var z = slice_cols(projected, t, 1);
    if (k > 0) z = add(z, matmul(p[slots.u], hidden));
    const Var sig_if = sigmoid(slice_rows(z, 0, 2 * h));
    const Var in_gate = slice_rows(sig_if, 0, h);
    const Var forget_gate = slice_rows(sig_if, h, h);
    const Var candidate = tanh(slice_rows(z, 2 * h, h));
    const Var out_gate = sigmoid(slice_rows(z, 3 * h, h));
    cell = k > 0 ? add(mul(forget_gate, cell), mul(in_gate, candidate)) : mul(in_gate, candidate);
    hidden = mul(out_gate, tanh(cell));
    outputs[t] = hidden;
  }
  return concat_cols(outputs);
}

}  // namespace

// ---- config / params ------------------------------------------------------

void ModelConfig::validate() const {
  if (embed_dim == 0) throw std::invalid_argument("ModelConfig: embed_dim must be > 0");
  if (hidden == 0) throw std::invalid_argument("ModelConfig: hidden must be > 0");
  if (lstm_layers == 0) throw std::invalid_argument("ModelConfig: lstm_layers must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
  if (max_query_len == 0 || max_doc_len == 0) throw std::invalid_argument("ModelConfig: lengths must be > 0");
  if (feature_count != kFeatureCount) {
    throw std::invalid_argument("ModelConfig: feature_count must be " + std::to_string(kFeatureCount));
  }
  if (!(init_range >= 0.0)) throw std::invalid_argument("ModelConfig: init_range must be >= 0");
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t e = config_.embed_dim, h = config_.hidden;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    names_.push_back(std::move(name));
    values_.emplace_back(rows, cols);
  };
  add("attn_W", 1, e);
  add("attn_b", 1, 1);
  for (LstmStack stack : {LstmStack::Encoder, LstmStack::Fusion}) {
    for (std::size_t layer = 0; layer < config_.lstm_layers; ++layer) {
      const std::size_t in = layer == 0 ? stack_input_dim(config_, stack) : 2 * h;
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string prefix = stack_name(stack) + ".l" + std::to_string(layer) + "." + dir + ".";
        add(prefix + "W", 4 * h, in);
        add(prefix + "U", 4 * h, h);
        add(prefix + "b", 4 * h, 1);
      }
    }
  }
  add("q_sentinel", 2 * h, 1);
  add("d_sentinel", 2 * h, 1);
  add("out_W", 1, 2 * h + config_.feature_count);
  add("out_b", 1, 1);
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  std::mt19937_64 rng(seed);
  const double r = p.config_.init_range;
  for (Matrix& m : p.values_)
    for (double& v : m.data) v = uniform(rng, -r, r);
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config) { return ModelParams(config); }

std::size_t ModelParams::slot(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw std::out_of_range("no parameter named '" + name + "'");
}

std::vector<Matrix> ModelParams::zero_grads() const {
  std::vector<Matrix> g;
  g.reserve(values_.size());
  for (const Matrix& m : values_) g.emplace_back(m.rows, m.cols);
  return g;
}

std::size_t ModelParams::total_size() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += m.size();
  return n;
}

ModelParams::LstmSlots ModelParams::lstm(LstmStack stack, std::size_t layer, bool backward) const {
  if (layer >= config_.lstm_layers) throw std::out_of_range("lstm layer out of range");
  const std::size_t per_stack = config_.lstm_layers * 6;
  const std::size_t base = 2 + (stack == LstmStack::Fusion ? per_stack : 0) + layer * 6 + (backward ? 3 : 0);
  return {base, base + 1, base + 2};
}

std::size_t ModelParams::sentinel(Side side) const {
  const std::size_t base = 2 + 2 * config_.lstm_layers * 6;
  return side == Side::Query ? base : base + 1;
}

BoundParams::BoundParams(Tape& tape, const ModelParams& params, bool track_grads)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    vars_.push_back(track_grads ? tape.parameter(params.value(i), i) : tape.reference(params.value(i)));
  }
}

// ---- network --------------------------------------------------------------

EmbeddedSequence embed_sequence(const EncodedSequence& seq, const EmbeddingSet& banks) {
  const std::size_t dim = banks.dim();
  if (dim == 0) throw std::invalid_argument("embed_sequence: embedding banks are empty");
  EmbeddedSequence out;
  const std::size_t cols = seq.length == 0 ? 1 : seq.length;
  for (Matrix& m : out.banks) m = Matrix(dim, cols);
  out.length = cols;
  for (std::size_t i = 0; i < seq.length; ++i) {
    const std::string& tok = seq.raw_tokens.at(i);
    const auto vecs = seq.ids.at(i) == Vocabulary::kUnknownId ? banks.oov_lookup(tok)
                                                              : banks.triple_lookup(tok);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < dim; ++k) out.banks[j](k, i) = vecs[j][k];
  }
  return out;
}

Var meta_embed(const BoundParams& p, const EmbeddedSequence& seq) {
  Tape& t = p.tape();
  const std::size_t dim = p.config().embed_dim;
  std::array<Var, 3> inputs;
  std::array<Var, 3> logits;
  for (std::size_t j = 0; j < 3; ++j) {
    if (seq.banks[j].rows != dim) {
      throw ShapeError("meta_embed: bank " + std::to_string(j) + " has shape " +
                       seq.banks[j].shape_string() + ", embed_dim is " + std::to_string(dim));
    }
    inputs[j] = t.reference(seq.banks[j]);
    logits[j] = add_broadcast(matmul(p[p.params().attn_w()], inputs[j]), p[p.params().attn_b()]);
  }
  const Var weights = softmax_cols(concat_rows(logits));  // 3 x cols
  Var out = mul_broadcast(inputs[0], slice_rows(weights, 0, 1));
  for (std::size_t j = 1; j < 3; ++j) out = add(out, mul_broadcast(inputs[j], slice_rows(weights, j, 1)));
  return out;
}

Var run_bilstm(const BoundParams& p, LstmStack stack, Var input, const ForwardMode& mode) {
  const ModelConfig& c = p.config();
  Var layer_input = input;
  Var output;
  for (std::size_t layer = 0; layer < c.lstm_layers; ++layer) {
    if (layer > 0) {
      if (mode.train && c.dropout > 0.0 && !mode.rng) {
        throw std::invalid_argument("run_bilstm: train-mode dropout needs an rng");
      }
      std::mt19937_64 unused;
      layer_input = dropout(output, c.dropout, mode.train, mode.rng ? *mode.rng : unused);
    }
    const Var fwd = run_lstm_direction(p, p.params().lstm(stack, layer, false), layer_input, false);
    const Var bwd = run_lstm_direction(p, p.params().lstm(stack, layer, true), layer_input, true);
    const Var both[2] = {fwd, bwd};
    output = concat_rows(both);
  }
  return output;
}

Var encode(const BoundParams& p, Var meta, std::size_t length, Side side, const ForwardMode& mode) {
  if (length == 0) throw std::invalid_argument("encode: sequence has no positions");
  if (length > meta.cols()) {
    throw ShapeError("encode: length " + std::to_string(length) + " exceeds " + meta.value().shape_string());
  }
  const std::size_t h2 = 2 * p.config().hidden;
  const Var real = length == meta.cols() ? meta : slice_cols(meta, 0, length);
  std::vector<Var> columns{run_bilstm(p, LstmStack::Encoder, real, mode)};
  if (meta.cols() > length) columns.push_back(p.tape().constant(Matrix(h2, meta.cols() - length)));
  columns.push_back(p[p.params().sentinel(side)]);
  return concat_cols(columns);
}

CoattentionOutput coattend(const BoundParams& p, Var query, std::size_t query_length, Var doc,
                           std::size_t doc_length, const ForwardMode& mode) {
  if (query.rows() != doc.rows()) {
    throw ShapeError("coattend: query " + query.value().shape_string() + " and document " +
                     doc.value().shape_string() + " differ in height");
  }
  const std::size_t n1 = query.cols(), m1 = doc.cols();
  if (query_length == 0 || query_length >= n1 || doc_length == 0 || doc_length >= m1) {
    throw std::invalid_argument("coattend: lengths must be in [1, cols - 1]");
  }
  CoattentionOutput out;
  out.affinity = matmul(transpose(doc), query);
  const auto doc_mask = padding_row_mask(m1, n1, doc_length);
  const auto query_mask = padding_row_mask(n1, m1, query_length);
  out.attn_query = softmax_cols(out.affinity, &doc_mask);
  out.attn_doc = softmax_cols(transpose(out.affinity), &query_mask);
  out.context_query = matmul(doc, out.attn_query);
  const Var stacked[2] = {query, out.context_query};
  out.context_doc = matmul(concat_rows(stacked), out.attn_doc);
  const Var fusion_parts[2] = {doc, out.context_doc};
  const Var fusion_input = slice_cols(concat_rows(fusion_parts), 0, doc_length);
  out.fused = run_bilstm(p, LstmStack::Fusion, fusion_input, mode);
  return out;
}

Var score_document(const BoundParams& p, Var fused, const FeatureVector& feats) {
  const auto f = feats.as_array();
  const Var parts[2] = {p.tape().constant(Matrix::column(f)), max_cols(fused)};
  const Var extended = concat_rows(parts);
  return add(matmul(p[p.params().out_w()], extended), p[p.params().out_b()]);
}

PairProbability pair_probability(double score1, double score2) {
  const double diff = score1 - score2;
  const double e = std::exp(-std::fabs(diff));
  const double smaller = e / (1.0 + e);
  const double larger = 1.0 - smaller;
  return diff >= 0.0 ? PairProbability{larger, smaller} : PairProbability{smaller, larger};
}

EncodedQuery encode_query(const BoundParams& p, const EmbeddedSequence& query, const ForwardMode& mode) {
  return {encode(p, meta_embed(p, query), query.length, Side::Query, mode), query.length};
}

Var score_against(const BoundParams& p, const EncodedQuery& query, const DocumentInput& doc,
                  const ForwardMode& mode) {
  const Var d = encode(p, meta_embed(p, doc.tokens), doc.tokens.length, Side::Document, mode);
  const CoattentionOutput co = coattend(p, query.encoded, query.length, d, doc.tokens.length, mode);
  return score_document(p, co.fused, doc.features);
}

PairForward forward_pair(const BoundParams& p, const EmbeddedSequence& query,
                         const DocumentInput& doc1, const DocumentInput& doc2,
                         const ForwardMode& mode) {
  const EncodedQuery q = encode_query(p, query, mode);
  PairForward out;
  out.score1 = score_against(p, q, doc1, mode);
  out.score2 = score_against(p, q, doc2, mode);
  out.prob = pair_probability(out.score1.scalar(), out.score2.scalar());
  return out;
}

std::vector<double> score_documents(const ModelParams& params, const EmbeddedSequence& query,
                                    const std::vector<DocumentInput>& docs) {
  Tape tape;
  const BoundParams p(tape, params, false);
  const ForwardMode eval;
  const EncodedQuery q = encode_query(p, query, eval);
  std::vector<double> scores;
  scores.reserve(docs.size());
  for (const DocumentInput& d : docs) scores.push_back(score_against(p, q, d, eval).scalar());
  return scores;
}

}  // namespace pairrank
