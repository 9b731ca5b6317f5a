#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pairrank/corpus.hpp"
#include "pairrank/embeddings.hpp"
#include "pairrank/features.hpp"
#include "pairrank/model.hpp"
#include "pairrank/optim.hpp"
#include "pairrank/ranking.hpp"

namespace pairrank {

inline constexpr double kProbabilityFloor = 1e-12;

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  double lr = 0.001;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// A query with every passage looked up and featurized, ready for the network.
struct PreparedSample {
  std::string query_id;
  EmbeddedSequence query;
  std::vector<DocumentInput> docs;
  std::optional<std::size_t> gold_index;
};

struct FeatureContext {
  const Vocabulary* vocab = nullptr;
  const EmbeddingSet* banks = nullptr;
  const CorpusStats* stats = nullptr;
  const NormStats* norm = nullptr;
};

PreparedSample prepare_sample(const QuerySample& sample, const ModelConfig& config,
                              const FeatureContext& ctx);
std::vector<PreparedSample> prepare_samples(const std::vector<QuerySample>& samples,
                                            const ModelConfig& config, const FeatureContext& ctx);

// Collection statistics over every training passage, and z-score parameters
// over every (query, passage) pair of the training set.
CorpusStats training_corpus_stats(const std::vector<QuerySample>& train);
NormStats training_norm_stats(const std::vector<QuerySample>& train, const CorpusStats& stats);

struct TrainingTriple {
  std::size_t sample = 0;  // index into the prepared training set
  std::size_t first = 0;   // passage index placed as d1
  std::size_t second = 0;  // passage index placed as d2
  bool gold_is_first = true;

  std::size_t gold() const { return gold_is_first ? first : second; }
  std::size_t negative() const { return gold_is_first ? second : first; }
};

// Uniform negative among the non-gold passages, uniform gold position.
TrainingTriple sample_triple(std::size_t passage_count, std::size_t gold_index, std::mt19937_64& rng,
                             std::size_t sample_index = 0);
TrainingTriple sample_triple(const QuerySample& sample, std::mt19937_64& rng, std::size_t sample_index = 0);

// -ln(max(p_gold, floor)).
double pair_loss(double p_gold);
// Same on the tape, from the two scores: -ln(max(sigmoid(gold - other), floor)).
Var pair_loss(Var gold_score, Var other_score);

// Loss of one triple. When grads is non-null the parameter gradients are
// added into it. train enables dropout, seeded by dropout_seed.
double triple_loss_and_grad(const ModelParams& params, const PreparedSample& sample,
                            const TrainingTriple& triple, bool train, std::uint64_t dropout_seed,
                            std::vector<Matrix>* grads);

struct EpochReport {
  std::size_t epoch = 0;  // 0 = before any update
  double mean_loss = 0.0;
  double dev_mrr = 0.0;
  double max_clipped_norm = 0.0;
};

// Eval-mode scores, greedy ranking and MRR over labeled prepared samples.
double evaluate_mrr(const ModelParams& params, const std::vector<PreparedSample>& samples,
                    std::size_t threads = 1);

class Trainer {
 public:
  Trainer(ModelParams params, TrainConfig config);

  // One optimization step over a batch: summed loss, backward, clip, Adam.
  // Returns the summed loss.
  double step(const std::vector<PreparedSample>& train, std::span<const TrainingTriple> batch,
              std::uint64_t dropout_seed);

  // Epoch 0 reports the initial loss without updating. Later epochs resample
  // one triple per training query, shuffle, and walk the batches.
  EpochReport run_epoch(std::size_t epoch, const std::vector<PreparedSample>& train,
                        const std::vector<PreparedSample>& dev);

  // Epochs 0..config.epochs, calling on_epoch after each.
  void train(const std::vector<PreparedSample>& train, const std::vector<PreparedSample>& dev,
             const std::function<void(const EpochReport&, const ModelParams&)>& on_epoch);

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const TrainConfig& config() const { return config_; }
  double last_grad_norm() const { return last_grad_norm_; }

 private:
  std::vector<TrainingTriple> epoch_triples(std::size_t epoch, const std::vector<PreparedSample>& train) const;

  ModelParams params_;
  TrainConfig config_;
  Adam adam_;
  double last_grad_norm_ = 0.0;
  double last_clipped_norm_ = 0.0;
};

}  // namespace pairrank
