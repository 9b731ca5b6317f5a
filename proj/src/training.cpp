#include "pairrank/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "pairrank/rng.hpp"

namespace pairrank {

namespace {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
// handled by exactly one worker; results must be written to per-index slots.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void add_into(std::vector<Matrix>& dst, const std::vector<Matrix>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t k = 0; k < dst[i].size(); ++k) dst[i].data[k] += src[i].data[k];
}

void zero(std::vector<Matrix>& grads) {
  for (Matrix& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be > 0");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be > 0");
  if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: clip_norm must be > 0");
  if (threads == 0) throw std::invalid_argument("TrainConfig: threads must be > 0");
}

// ---- data preparation -----------------------------------------------------

PreparedSample prepare_sample(const QuerySample& sample, const ModelConfig& config,
                              const FeatureContext& ctx) {
  if (!ctx.vocab || !ctx.banks || !ctx.stats) {
    throw std::invalid_argument("prepare_sample: vocabulary, banks and stats are required");
  }
  if (ctx.banks->dim() != config.embed_dim) {
    throw ShapeError("prepare_sample: embedding dim " + std::to_string(ctx.banks->dim()) +
                     " does not match embed_dim " + std::to_string(config.embed_dim));
  }
  PreparedSample out;
  out.query_id = sample.query_id;
  out.gold_index = sample.gold_index;
  out.query = embed_sequence(encode(sample.query_tokens, *ctx.vocab, config.max_query_len), *ctx.banks);
  out.docs.reserve(sample.passages.size());
  for (const Tokens& passage : sample.passages) {
    DocumentInput doc;
    doc.tokens = embed_sequence(encode(passage, *ctx.vocab, config.max_doc_len), *ctx.banks);
    doc.features = feature_vector(sample.query_tokens, passage, *ctx.stats, ctx.norm);
    out.docs.push_back(std::move(doc));
  }
  return out;
}

std::vector<PreparedSample> prepare_samples(const std::vector<QuerySample>& samples,
                                            const ModelConfig& config, const FeatureContext& ctx) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const QuerySample& s : samples) out.push_back(prepare_sample(s, config, ctx));
  return out;
}

CorpusStats training_corpus_stats(const std::vector<QuerySample>& train) {
  std::vector<Tokens> docs;
  for (const QuerySample& s : train)
    for (const Tokens& p : s.passages) docs.push_back(p);
  return corpus_stats(docs);
}

NormStats training_norm_stats(const std::vector<QuerySample>& train, const CorpusStats& stats) {
  std::vector<FeatureVector> raw;
  for (const QuerySample& s : train)
    for (const Tokens& p : s.passages) raw.push_back(feature_vector(s.query_tokens, p, stats));
  return NormStats::fit(raw);
}

// ---- triples and loss -----------------------------------------------------

TrainingTriple sample_triple(std::size_t passage_count, std::size_t gold_index, std::mt19937_64& rng,
                             std::size_t sample_index) {
  if (passage_count < 2 || gold_index >= passage_count) {
    throw std::invalid_argument("sample_triple: need a gold passage and at least one negative");
  }
  std::size_t negative = uniform_index(rng, passage_count - 1);
  if (negative >= gold_index) ++negative;
  const bool gold_first = uniform_index(rng, 2) == 0;
  TrainingTriple t;
  t.sample = sample_index;
  t.gold_is_first = gold_first;
  t.first = gold_first ? gold_index : negative;
  t.second = gold_first ? negative : gold_index;
  return t;
}

TrainingTriple sample_triple(const QuerySample& sample, std::mt19937_64& rng, std::size_t sample_index) {
  if (!sample.gold_index) {
    throw std::invalid_argument("sample_triple: query '" + sample.query_id + "' is unlabeled");
  }
  return sample_triple(sample.passages.size(), *sample.gold_index, rng, sample_index);
}

double pair_loss(double p_gold) { return -std::log(std::max(p_gold, kProbabilityFloor)); }

Var pair_loss(Var gold_score, Var other_score) {
  return scale(log_floor(sigmoid(sub(gold_score, other_score)), kProbabilityFloor), -1.0);
}

double triple_loss_and_grad(const ModelParams& params, const PreparedSample& sample,
                            const TrainingTriple& triple, bool train, std::uint64_t dropout_seed,
                            std::vector<Matrix>* grads) {
  Tape tape;
  const BoundParams bound(tape, params, grads != nullptr);
  std::mt19937_64 rng(dropout_seed);
  const ForwardMode mode{train, &rng};
  const PairForward fwd =
      forward_pair(bound, sample.query, sample.docs.at(triple.first), sample.docs.at(triple.second), mode);
  const Var loss = triple.gold_is_first ? pair_loss(fwd.score1, fwd.score2) : pair_loss(fwd.score2, fwd.score1);
  const double value = loss.scalar();
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "non-finite loss for query '" << sample.query_id << "' passages (" << triple.first << ", "
       << triple.second << ")";
    throw std::runtime_error(os.str());
  }
  if (grads) {
    tape.backward(loss);
    tape.accumulate_parameter_grads(*grads);
  }
  return value;
}

double evaluate_mrr(const ModelParams& params, const std::vector<PreparedSample>& samples,
                    std::size_t threads) {
  std::vector<RankedQuery> ranked(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const PreparedSample& s = samples[i];
    if (!s.gold_index) throw std::invalid_argument("evaluate_mrr: query '" + s.query_id + "' is unlabeled");
    const std::vector<double> scores = score_documents(params, s.query, s.docs);
    ranked[i] = {greedy_rank(pdm_from_scores(scores)), *s.gold_index};
  });
  return mrr(ranked);
}

// ---- trainer --------------------------------------------------------------

Trainer::Trainer(ModelParams params, TrainConfig config)
    : params_(std::move(params)),
      config_(config),
      adam_(params_.values(), AdamOptions{config.lr, 0.9, 0.999, 1e-8}) {
  config_.validate();
}

double Trainer::step(const std::vector<PreparedSample>& train, std::span<const TrainingTriple> batch,
                     std::uint64_t dropout_seed) {
  std::vector<Matrix> total = params_.zero_grads();
  const std::size_t wave = std::max<std::size_t>(1, config_.threads);
  std::vector<std::vector<Matrix>> scratch(std::min(wave, batch.size()), params_.zero_grads());
  std::vector<double> losses(batch.size(), 0.0);
  // Per-triple gradients are reduced in triple order, so the result does not
  // depend on the thread count.
  for (std::size_t start = 0; start < batch.size(); start += wave) {
    const std::size_t count = std::min(wave, batch.size() - start);
    parallel_for(count, config_.threads, [&](std::size_t k) {
      const std::size_t i = start + k;
      zero(scratch[k]);
      losses[i] = triple_loss_and_grad(params_, train.at(batch[i].sample), batch[i], true,
                                       derive_seed(dropout_seed, {i}), &scratch[k]);
    });
    for (std::size_t k = 0; k < count; ++k) add_into(total, scratch[k]);
  }
  last_grad_norm_ = clip_global_norm(total, config_.clip_norm);
  last_clipped_norm_ = global_norm(total);
  adam_.step(params_.values(), total);
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum;
}

std::vector<TrainingTriple> Trainer::epoch_triples(std::size_t epoch,
                                                   const std::vector<PreparedSample>& train) const {
  std::mt19937_64 rng(derive_seed(config_.seed, {0x7472697000ULL, epoch}));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<TrainingTriple> triples;
  triples.reserve(order.size());
  for (std::size_t idx : order) {
    const PreparedSample& s = train[idx];
    if (!s.gold_index) throw std::invalid_argument("training query '" + s.query_id + "' is unlabeled");
    triples.push_back(sample_triple(s.docs.size(), *s.gold_index, rng, idx));
  }
  return triples;
}

EpochReport Trainer::run_epoch(std::size_t epoch, const std::vector<PreparedSample>& train,
                               const std::vector<PreparedSample>& dev) {
  if (train.empty()) throw std::invalid_argument("Trainer: empty training set");
  const std::vector<TrainingTriple> triples = epoch_triples(epoch, train);
  EpochReport report;
  report.epoch = epoch;
  double loss_sum = 0.0;
  if (epoch == 0) {
    std::vector<double> losses(triples.size());
    parallel_for(triples.size(), config_.threads, [&](std::size_t i) {
      losses[i] = triple_loss_and_grad(params_, train[triples[i].sample], triples[i], false, 0, nullptr);
    });
    for (double l : losses) loss_sum += l;
  } else {
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < triples.size(); start += config_.batch_size, ++batch_index) {
      const std::size_t count = std::min(config_.batch_size, triples.size() - start);
      const std::uint64_t seed = derive_seed(config_.seed, {0x64726f70ULL, epoch, batch_index});
      loss_sum += step(train, std::span(triples).subspan(start, count), seed);
      report.max_clipped_norm = std::max(report.max_clipped_norm, last_clipped_norm_);
    }
  }
  report.mean_loss = loss_sum / static_cast<double>(triples.size());
  report.dev_mrr = dev.empty() ? 0.0 : evaluate_mrr(params_, dev, config_.threads);
  return report;
}

void Trainer::train(const std::vector<PreparedSample>& train, const std::vector<PreparedSample>& dev,
                    const std::function<void(const EpochReport&, const ModelParams&)>& on_epoch) {
  for (std::size_t epoch = 0; epoch <= config_.epochs; ++epoch) {
    const EpochReport report = run_epoch(epoch, train, dev);
    if (on_epoch) on_epoch(report, params_);
  }
}

}  // namespace pairrank
