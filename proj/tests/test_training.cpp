#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>

#include "cli.hpp"
#include "pairrank/checkpoint.hpp"
#include "pairrank/rng.hpp"
#include "pairrank/training.hpp"
#include "test_util.hpp"

using namespace pairrank;

namespace {

// Ten passages of random words per query; gold passage repeats the query.
std::vector<QuerySample> toy_queries(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> words = {"red", "green", "blue", "cyan", "gold", "pink", "gray", "teal"};
  std::vector<QuerySample> out;
  for (std::size_t q = 0; q < count; ++q) {
    QuerySample s;
    s.query_id = "q" + std::to_string(q);
    s.query_tokens = {words[uniform_index(rng, 8)], words[uniform_index(rng, 8)]};
    s.gold_index = uniform_index(rng, 10);
    for (std::size_t p = 0; p < 10; ++p) {
      Tokens t;
      for (std::size_t k = 0; k < 2 + uniform_index(rng, 4); ++k) t.push_back(words[uniform_index(rng, 8)]);
      if (p == *s.gold_index) t.insert(t.end(), s.query_tokens.begin(), s.query_tokens.end());
      s.passages.push_back(t);
    }
    out.push_back(s);
  }
  return out;
}

struct ToySetup {
  ModelConfig config;
  Vocabulary vocab;
  EmbeddingSet banks;
  CorpusStats stats;
  NormStats norm;
  std::vector<PreparedSample> prepared;

  explicit ToySetup(std::size_t count)
      : banks(EmbeddingBank(BankRole::Word2Vec, 0), EmbeddingBank(BankRole::GloVe, 0),
              EmbeddingBank(BankRole::FastText, 0)) {
    config = cli::tiny_config();
    const auto samples = toy_queries(count, 5);
    std::vector<Tokens> corpus;
    for (const auto& s : samples)
      for (const auto& p : s.passages) corpus.push_back(p);
    vocab = Vocabulary::build(corpus, 1);
    std::mt19937_64 rng(6);
    std::array<EmbeddingBank, 3> b = {EmbeddingBank(BankRole::Word2Vec, 12), EmbeddingBank(BankRole::GloVe, 12),
                                      EmbeddingBank(BankRole::FastText, 12)};
    for (std::uint32_t id = 1; id <= vocab.size(); ++id)
      for (auto& bank : b) {
        std::vector<double> v(12);
        for (double& x : v) x = uniform(rng, -1, 1);
        bank.add(vocab.token(id), v);
      }
    banks = EmbeddingSet(b[0], b[1], b[2]);
    stats = training_corpus_stats(samples);
    norm = training_norm_stats(samples, stats);
    prepared = prepare_samples(samples, config, {&vocab, &banks, &stats, &norm});
  }
};

}  // namespace

TEST_SUITE("training") {

TEST_CASE("triple sampling frequencies") {
  std::mt19937_64 rng(123);
  std::array<int, 10> negatives{};
  int gold_first = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const TrainingTriple t = sample_triple(10, 4, rng);
    CHECK(t.gold() == 4);
    CHECK(t.negative() != 4);
    ++negatives[t.negative()];
    gold_first += t.gold_is_first;
  }
  CHECK(negatives[4] == 0);
  for (std::size_t k = 0; k < 10; ++k)
    if (k != 4) CHECK(std::fabs(negatives[k] / double(draws) - 1.0 / 9.0) <= 0.02);
  CHECK(std::fabs(gold_first / double(draws) - 0.5) <= 0.02);
}

TEST_CASE("triple sampling is seed-deterministic and needs a label") {
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    const TrainingTriple x = sample_triple(10, 2, a), y = sample_triple(10, 2, b);
    CHECK(x.first == y.first);
    CHECK(x.second == y.second);
  }
  QuerySample unlabeled;
  unlabeled.passages.resize(10);
  CHECK_THROWS(sample_triple(unlabeled, a));
}

TEST_CASE("pair loss") {
  CHECK(pair_loss(1.0) == 0.0);
  CHECK(pair_loss(0.5) == doctest::Approx(0.69314718055994530942).epsilon(1e-15));
  CHECK(pair_loss(std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pair_loss(0.0) == doctest::Approx(-std::log(1e-12)).epsilon(1e-15));
}

TEST_CASE("initial loss is close to ln 2") {
  const ToySetup toy(120);
  Trainer trainer(ModelParams::init(toy.config, 1), TrainConfig{});
  const EpochReport r = trainer.run_epoch(0, toy.prepared, {});
  CHECK(std::fabs(r.mean_loss - std::log(2.0)) <= 0.1);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  const ToySetup toy(20);
  const ModelParams start = ModelParams::init(toy.config, 2);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.batch_size = 4;
  cfg.epochs = 3;
  Trainer trainer(start, cfg);
  trainer.train(toy.prepared, {}, nullptr);
  CHECK(trainer.params() == start);
}

TEST_CASE("clipped gradient norm stays under the threshold") {
  const ToySetup toy(30);
  TrainConfig cfg;
  cfg.batch_size = 30;
  cfg.clip_norm = 1e-3;
  Trainer trainer(ModelParams::init(toy.config, 3), cfg);
  const EpochReport r = trainer.run_epoch(1, toy.prepared, {});
  CHECK(trainer.last_grad_norm() > 1e-3);
  CHECK(r.max_clipped_norm <= 1e-3 * (1 + 1e-12));
}

TEST_CASE("single triple is memorized") {
  cli::GradCheckInstance inst = cli::make_gradcheck_instance(cli::tiny_config(), 4);
  inst.params = ModelParams::init(cli::tiny_config(), 4);
  TrainConfig cfg;
  cfg.lr = 0.01;
  Trainer trainer(inst.params, cfg);
  const std::vector<PreparedSample> data = {inst.sample};
  const std::vector<TrainingTriple> batch = {inst.triple};
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) losses.push_back(trainer.step(data, batch, 0));
  for (std::size_t i = 21; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1]);
  CHECK(losses.back() < 0.01);
}

TEST_CASE("training is reproducible and independent of thread count") {
  const ToySetup toy(24);
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.epochs = 2;
  cfg.seed = 17;
  ModelConfig mc = toy.config;
  mc.dropout = 0.3;
  mc.lstm_layers = 2;
  const ModelParams start = ModelParams::init(mc, 1);
  Trainer a(start, cfg), b(start, cfg);
  cfg.threads = 3;
  Trainer c(start, cfg);
  std::vector<double> la, lc;
  a.train(toy.prepared, toy.prepared, [&](const EpochReport& r, const ModelParams&) { la.push_back(r.mean_loss); });
  b.train(toy.prepared, toy.prepared, nullptr);
  c.train(toy.prepared, toy.prepared, [&](const EpochReport& r, const ModelParams&) { lc.push_back(r.mean_loss); });
  CHECK(a.params() == b.params());
  CHECK(a.params() == c.params());
  CHECK(la == lc);
  CHECK_FALSE(a.params() == start);
}

TEST_CASE("evaluate_mrr needs labels") {
  ToySetup toy(5);
  toy.prepared[2].gold_index.reset();
  CHECK_THROWS(evaluate_mrr(ModelParams::init(toy.config, 1), toy.prepared));
}

TEST_CASE("checkpoint round trip and errors") {
  testutil::TempDir dir("ckpt");
  const ModelConfig config = cli::tiny_config();
  Checkpoint ckpt{ModelParams::init(config, 8), {}, 0xfeedULL, 7};
  ckpt.norm.mean = {1.5, -2.0, 1e-300};
  ckpt.norm.stddev = {0.1, 1.0 / 3.0, 2.0};
  const std::string path = dir.file("m.ckpt");
  save_checkpoint(ckpt, path);
  CHECK(load_checkpoint(path) == ckpt);
  CHECK(load_checkpoint(path, &config) == ckpt);

  const std::string bytes = testutil::read_file(path);
  SUBCASE("trailing bytes") {
    testutil::write_file(path, bytes + "x");
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("truncated") {
    testutil::write_file(path, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
  SUBCASE("version") {
    std::string bad = bytes;
    bad[8] = 9;
    testutil::write_file(path, bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), CheckpointError);
  }
  SUBCASE("different hidden size names the parameter") {
    ModelConfig other = config;
    other.hidden = 9;
    CHECK_THROWS_WITH_AS(load_checkpoint(path, &other), doctest::Contains("shape mismatch for parameter enc.l0.fwd.W"),
                         CheckpointError);
  }
  SUBCASE("bad magic") {
    testutil::write_file(path, "not a checkpoint at all");
    CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  }
}

TEST_CASE("model config text round trip") {
  ModelConfig c = cli::tiny_config();
  c.dropout = 0.1;
  c.init_range = 1.0 / 3.0;
  CHECK(model_config_from_text(model_config_to_text(c)) == c);
  CHECK_THROWS_AS(model_config_from_text("colour=blue\n"), CheckpointError);
}

}  // TEST_SUITE
