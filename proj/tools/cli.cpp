#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "pairrank/checkpoint.hpp"
#include "pairrank/corpus.hpp"
#include "pairrank/embeddings.hpp"
#include "pairrank/features.hpp"
#include "pairrank/ranking.hpp"
#include "pairrank/rng.hpp"

namespace fs = std::filesystem;

namespace pairrank::cli {

namespace {

// A failed self-check (gradient check, paranoid cross-check). Exit code 3.
class CheckFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is required");
  if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path);
}

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

std::string join_ranks(const std::vector<std::size_t>& rank) {
  std::string out;
  for (std::size_t i = 0; i < rank.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(rank[i]);
  }
  return out;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim, double range) {
  std::vector<double> v(dim);
  for (double& x : v) x = uniform(rng, -range, range);
  return v;
}

}  // namespace

// ---- RunConfig ------------------------------------------------------------

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> table = {
      {"embed_dim", "300", "embedding dimension of every bank"},
      {"hidden", "500", "LSTM hidden size per direction"},
      {"lstm_layers", "2", "layers in the encoder and fusion LSTM stacks"},
      {"dropout", "0.2", "dropout between stacked LSTM layers"},
      {"max_query_len", "15", "query capacity in tokens (head kept)"},
      {"max_doc_len", "70", "passage capacity in tokens (head kept)"},
      {"init_range", "0.01", "parameters start uniform in [-r, r]"},
      {"epochs", "100", "training epochs after the initial evaluation"},
      {"batch_size", "256", "triples per optimizer step"},
      {"lr", "0.001", "Adam learning rate"},
      {"clip_norm", "5", "global gradient norm threshold"},
      {"seed", "1", "seed for initialization, sampling, dropout and splits"},
      {"threads", "1", "worker threads; results do not depend on it"},
      {"min_frequency", "3", "vocabulary frequency threshold"},
      {"dev_count", "0", "queries split off the training file when no dev file is given"},
      {"checkpoint_every", "1", "write checkpoints/epoch_NNN.ckpt every N epochs (0 = final only)"},
      {"train", "", "labeled training dataset TSV"},
      {"dev", "", "labeled dev dataset TSV"},
      {"w2v", "", "Word2Vec vector file"},
      {"glove", "", "GloVe vector file"},
      {"fasttext", "", "FastText vector file"},
      {"fasttext_subwords", "", "FastText character n-gram vector file (optional)"},
      {"out", "", "output directory"},
  };
  return table;
}

RunConfig::RunConfig() {
  for (const Key& k : keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path);
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      config.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError("config key " + key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t RunConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw UsageError("config key " + key + ": expected a number, got '" + v + "'");
  }
  return out;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig c;
  c.embed_dim = get_size("embed_dim");
  c.hidden = get_size("hidden");
  c.lstm_layers = get_size("lstm_layers");
  c.dropout = get_double("dropout");
  c.max_query_len = get_size("max_query_len");
  c.max_doc_len = get_size("max_doc_len");
  c.init_range = get_double("init_range");
  c.validate();
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.epochs = get_size("epochs");
  c.batch_size = get_size("batch_size");
  c.lr = get_double("lr");
  c.clip_norm = get_double("clip_norm");
  c.seed = get_u64("seed");
  c.threads = get_size("threads");
  c.validate();
  return c;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Key& k : keys()) out += std::string(k.name) + "=" + values_.at(k.name) + "\n";
  return out;
}

// ---- synthetic data -------------------------------------------------------

void synthesize(const std::string& out_dir, const SynthOptions& o) {
  constexpr std::size_t kQueryTerms = 4;
  if (o.inventory < 4 * kQueryTerms) throw UsageError("synth: inventory must be at least 16 tokens");
  if (o.dim == 0) throw UsageError("synth: dim must be positive");
  ensure_dir(out_dir);
  std::mt19937_64 rng(derive_seed(o.seed, {0x73796e7468ULL}));

  std::vector<std::string> inventory(o.inventory);
  for (std::size_t i = 0; i < o.inventory; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%04zu", i);
    inventory[i] = buf;
  }

  auto draw_filler = [&](const std::vector<std::size_t>& excluded) {
    for (;;) {
      const std::size_t t = uniform_index(rng, inventory.size());
      if (std::find(excluded.begin(), excluded.end(), t) == excluded.end()) return t;
    }
  };

  auto make_passage = [&](const std::vector<std::size_t>& query, std::size_t shared) {
    const std::size_t length = 12 + uniform_index(rng, 9);
    std::vector<std::size_t> picked = query;
    shuffle(picked, rng);
    picked.resize(shared);
    std::vector<std::size_t> tokens = picked;
    while (tokens.size() < length) tokens.push_back(draw_filler(query));
    shuffle(tokens, rng);
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::string word = inventory[tokens[i]];
      if (i == 0) word[0] = 'W';
      text += (i ? " " : "") + word;
    }
    return text + ".";
  };

  auto write_split = [&](const std::string& name, std::size_t count, std::size_t id_base) {
    std::ostringstream os;
    for (std::size_t q = 0; q < count; ++q) {
      std::vector<std::size_t> all(inventory.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      std::vector<std::size_t> query;
      for (std::size_t k = 0; k < kQueryTerms; ++k) {
        const std::size_t pick = k + uniform_index(rng, all.size() - k);
        std::swap(all[k], all[pick]);
        query.push_back(all[k]);
      }
      std::string query_text = "What is the";
      for (std::size_t t : query) query_text += " " + inventory[t];
      query_text += "?";
      char qid[32];
      std::snprintf(qid, sizeof qid, "q%06zu", id_base + q);
      const std::size_t gold = uniform_index(rng, kPassagesPerQuery);
      for (std::size_t p = 0; p < kPassagesPerQuery; ++p) {
        const bool is_gold = p == gold;
        const std::size_t shared = is_gold ? 3 + uniform_index(rng, 2) : uniform_index(rng, 2);
        os << qid << '\t' << query_text << '\t' << make_passage(query, shared) << '\t' << (is_gold ? 1 : 0)
           << '\t' << p << '\n';
      }
    }
    write_text(fs::path(out_dir) / name, os.str());
  };
  write_split("train.tsv", o.train_queries, 0);
  write_split("dev.tsv", o.dev_queries, o.train_queries);

  // Word2Vec covers every token; GloVe and FastText each miss about a tenth,
  // and FastText carries subword vectors for every inventory n-gram.
  EmbeddingBank w2v(BankRole::Word2Vec, o.dim), glove(BankRole::GloVe, o.dim), ft(BankRole::FastText, o.dim);
  for (const std::string& token : inventory) {
    w2v.add(token, random_vector(rng, o.dim, o.vector_range));
    std::vector<double> g = random_vector(rng, o.dim, o.vector_range);
    if (uniform_index(rng, 10) != 0) glove.add(token, std::move(g));
    std::vector<double> f = random_vector(rng, o.dim, o.vector_range);
    if (uniform_index(rng, 10) != 0) ft.add(token, std::move(f));
  }
  std::vector<std::string> ngrams;
  for (const std::string& token : inventory)
    for (std::string& g : char_ngrams(token)) ngrams.push_back(std::move(g));
  std::sort(ngrams.begin(), ngrams.end());
  ngrams.erase(std::unique(ngrams.begin(), ngrams.end()), ngrams.end());
  for (const std::string& g : ngrams) ft.add_subword(g, random_vector(rng, o.dim, o.vector_range));

  const fs::path dir(out_dir);
  w2v.save((dir / "w2v.vec").string());
  glove.save((dir / "glove.vec").string());
  ft.save((dir / "fasttext.vec").string());
  ft.save_subwords((dir / "fasttext.subwords.vec").string());

  std::ostringstream cfg;
  cfg << "seed=" << o.seed << "\ntrain_queries=" << o.train_queries << "\ndev_queries=" << o.dev_queries
      << "\ndim=" << o.dim << "\ninventory=" << o.inventory
      << "\nvector_range=" << o.vector_range << "\n";
  write_text(dir / "synth_config.txt", cfg.str());
}

// ---- gradient check instance ----------------------------------------------

ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 12;
  c.hidden = 8;
  c.lstm_layers = 1;
  c.dropout = 0.0;
  c.max_query_len = 4;
  c.max_doc_len = 6;
  return c;
}

GradCheckInstance make_gradcheck_instance(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(derive_seed(seed, {0x67726164ULL}));
  const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
  std::map<std::string, std::size_t> counts;
  for (const std::string& w : words) counts[w] = 5;
  const Vocabulary vocab = Vocabulary::from_counts(counts, 1);

  const std::size_t dim = config.embed_dim;
  EmbeddingBank w2v(BankRole::Word2Vec, dim), glove(BankRole::GloVe, dim), ft(BankRole::FastText, dim);
  for (const std::string& w : words) {
    w2v.add(w, random_vector(rng, dim, 1.0));
    glove.add(w, random_vector(rng, dim, 1.0));
    ft.add(w, random_vector(rng, dim, 1.0));
  }
  for (const std::string& g : char_ngrams("omega")) ft.add_subword(g, random_vector(rng, dim, 1.0));
  const EmbeddingSet banks(w2v, glove, ft);

  auto pick = [&](std::size_t n) {
    Tokens out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(words[uniform_index(rng, words.size())]);
    return out;
  };
  Tokens query = pick(std::max<std::size_t>(1, config.max_query_len - 1));
  query.push_back("omega");

  GradCheckInstance inst{ModelParams::init(config, derive_seed(seed, {1})), {}, {}};
  inst.sample.query_id = "gradcheck";
  inst.sample.gold_index = 0;
  inst.sample.query = embed_sequence(encode(query, vocab, config.max_query_len), banks);
  const std::size_t short_len = std::max<std::size_t>(1, config.max_doc_len / 2);
  for (std::size_t len : {config.max_doc_len, short_len}) {
    DocumentInput doc;
    doc.tokens = embed_sequence(encode(pick(len), vocab, config.max_doc_len), banks);
    doc.features = {uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)};
    inst.sample.docs.push_back(std::move(doc));
  }
  inst.triple = {0, 0, 1, true};
  return inst;
}

// ---- commands -------------------------------------------------------------

namespace {

struct TrainArtifacts {
  Vocabulary vocab;
  CorpusStats stats;
};

EmbeddingSet load_banks(const RunConfig& config) {
  require_file(config.get("w2v"), "Word2Vec bank");
  require_file(config.get("glove"), "GloVe bank");
  require_file(config.get("fasttext"), "FastText bank");
  EmbeddingBank ft = EmbeddingBank::load(config.get("fasttext"), BankRole::FastText);
  if (!config.get("fasttext_subwords").empty()) {
    require_file(config.get("fasttext_subwords"), "FastText subword bank");
    ft.load_subwords(config.get("fasttext_subwords"));
  }
  EmbeddingSet banks(EmbeddingBank::load(config.get("w2v"), BankRole::Word2Vec),
                     EmbeddingBank::load(config.get("glove"), BankRole::GloVe), std::move(ft));
  if (banks.dim() != config.get_size("embed_dim")) {
    throw DataError("embedding banks have dimension " + std::to_string(banks.dim()) + " but embed_dim is " +
                    config.get("embed_dim"));
  }
  return banks;
}

std::vector<Tokens> all_texts(const std::vector<QuerySample>& samples) {
  std::vector<Tokens> corpus;
  for (const QuerySample& s : samples) {
    corpus.push_back(s.query_tokens);
    for (const Tokens& p : s.passages) corpus.push_back(p);
  }
  return corpus;
}

int cmd_build_vocab(const std::string& data, const std::string& out, std::size_t min_frequency) {
  require_file(data, "dataset");
  const Vocabulary vocab = Vocabulary::build(all_texts(load_dataset(data, false)), min_frequency);
  vocab.save(out);
  std::cerr << "vocabulary: " << vocab.size() << " tokens written to " << out << "\n";
  return kOk;
}

int cmd_build_stats(const std::string& data, const std::string& out) {
  require_file(data, "dataset");
  const CorpusStats stats = training_corpus_stats(load_dataset(data, false));
  stats.save(out);
  std::cerr << "corpus stats: " << stats.doc_count << " passages written to " << out << "\n";
  return kOk;
}

int cmd_train(const RunConfig& config) {
  const ModelConfig model_config = config.model_config();
  const TrainConfig train_config = config.train_config();
  const std::string out = config.get("out");
  if (out.empty()) throw UsageError("train: --out is required");
  require_file(config.get("train"), "training dataset");

  std::vector<QuerySample> train = load_dataset(config.get("train"), true);
  std::vector<QuerySample> dev;
  if (!config.get("dev").empty()) {
    require_file(config.get("dev"), "dev dataset");
    dev = load_dataset(config.get("dev"), true);
  } else if (config.get_size("dev_count") > 0) {
    TrainDevSplit split = split_train_dev(train, config.get_size("dev_count"), train_config.seed);
    train = std::move(split.train);
    dev = std::move(split.dev);
  }
  if (train.empty()) throw DataError("training dataset " + config.get("train") + " is empty");
  const EmbeddingSet banks = load_banks(config);

  const fs::path dir(out);
  ensure_dir(dir);
  write_text(dir / "run_config.txt", config.to_text());

  const Vocabulary vocab = Vocabulary::build(all_texts(train), config.get_size("min_frequency"));
  vocab.save((dir / "vocab.tsv").string());
  const CorpusStats stats = training_corpus_stats(train);
  stats.save((dir / "corpus_stats.txt").string());
  const NormStats norm = training_norm_stats(train, stats);

  const FeatureContext ctx{&vocab, &banks, &stats, &norm};
  const std::vector<PreparedSample> train_prepared = prepare_samples(train, model_config, ctx);
  const std::vector<PreparedSample> dev_prepared = prepare_samples(dev, model_config, ctx);

  const std::size_t every = config.get_size("checkpoint_every");
  if (every > 0) ensure_dir(dir / "checkpoints");
  std::ofstream log(dir / "train.log", std::ios::trunc);
  if (!log) throw DataError("cannot write " + (dir / "train.log").string());
  log << "epoch\tmean_loss\tdev_mrr\n";
  std::cerr << "epoch\tmean_loss\tdev_mrr\n";

  Trainer trainer(ModelParams::init(model_config, train_config.seed), train_config);
  const std::uint64_t fingerprint = vocab.fingerprint();
  trainer.train(train_prepared, dev_prepared, [&](const EpochReport& r, const ModelParams& params) {
    char line[128];
    std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\n", r.epoch, r.mean_loss, r.dev_mrr);
    log << line << std::flush;
    std::cerr << line;
    if (every > 0 && r.epoch % every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.ckpt", r.epoch);
      save_checkpoint({params, norm, fingerprint, r.epoch}, (dir / "checkpoints" / name).string());
    }
  });
  save_checkpoint({trainer.params(), norm, fingerprint, train_config.epochs}, (dir / "model.ckpt").string());
  std::cout << (dir / "model.ckpt").string() << "\n";
  return kOk;
}

struct RankOptions {
  std::string run;
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string scorer = "model";
  std::string stats;
  bool exact = false;
  bool paranoid = false;
  std::size_t threads = 1;
};

int cmd_rank(const RankOptions& o) {
  if (o.scorer != "model" && o.scorer != "bm25") throw UsageError("--scorer must be model or bm25");
  require_file(o.data, "dataset");
  const std::vector<QuerySample> samples = load_dataset(o.data, false);
  std::vector<RankingResult> results(samples.size());
  std::vector<std::string> problems(samples.size());

  auto rank_pdm = [&](const Pdm& pdm) { return o.exact ? exact_rank(pdm) : greedy_rank(pdm); };

  if (o.scorer == "bm25") {
    std::string stats_path = o.stats;
    if (stats_path.empty() && !o.run.empty()) stats_path = (fs::path(o.run) / "corpus_stats.txt").string();
    if (stats_path.empty()) throw UsageError("rank --scorer bm25 needs --stats or --run");
    require_file(stats_path, "corpus stats");
    const CorpusStats stats = CorpusStats::load(stats_path);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::vector<double> scores;
      for (const Tokens& p : samples[i].passages) scores.push_back(bm25(samples[i].query_tokens, p, stats));
      results[i] = ranking_from_order(argsort_descending(scores));
    }
  } else {
    if (o.run.empty()) throw UsageError("rank: --run is required for the model scorer");
    const fs::path dir(o.run);
    require_file((dir / "run_config.txt").string(), "run config");
    const RunConfig config = RunConfig::from_file((dir / "run_config.txt").string());
    const ModelConfig model_config = config.model_config();
    const std::string ckpt_path = o.checkpoint.empty() ? (dir / "model.ckpt").string() : o.checkpoint;
    require_file(ckpt_path, "checkpoint");
    require_file((dir / "vocab.tsv").string(), "vocabulary");
    require_file((dir / "corpus_stats.txt").string(), "corpus stats");
    const Checkpoint ckpt = load_checkpoint(ckpt_path, &model_config);
    const Vocabulary vocab = Vocabulary::load((dir / "vocab.tsv").string());
    if (vocab.fingerprint() != ckpt.vocab_fingerprint) {
      throw DataError("vocabulary " + (dir / "vocab.tsv").string() + " does not match checkpoint " + ckpt_path);
    }
    const CorpusStats stats = CorpusStats::load((dir / "corpus_stats.txt").string());
    const EmbeddingSet banks = load_banks(config);
    const FeatureContext ctx{&vocab, &banks, &stats, &ckpt.norm};

    parallel_for(samples.size(), std::max<std::size_t>(1, o.threads), [&](std::size_t i) {
      const PreparedSample s = prepare_sample(samples[i], model_config, ctx);
      const std::vector<double> scores = score_documents(ckpt.params, s.query, s.docs);
      const Pdm pdm = pdm_from_scores(scores);
      results[i] = rank_pdm(pdm);
      if (!o.paranoid) return;
      // Re-score every pair through the literal pair network and compare.
      std::ostringstream err;
      for (std::size_t a = 0; a < s.docs.size(); ++a) {
        for (std::size_t b = a + 1; b < s.docs.size(); ++b) {
          Tape tape;
          const BoundParams bound(tape, ckpt.params, false);
          const PairForward fwd = forward_pair(bound, s.query, s.docs[a], s.docs[b], ForwardMode{});
          if (std::fabs(fwd.prob.first - pdm(a, b)) > 1e-12) {
            err << "query " << s.query_id << ": pair (" << a << ", " << b << ") gives " << fwd.prob.first
                << ", matrix holds " << pdm(a, b) << "; ";
          }
        }
      }
      const ConsistencyReport report = consistency_check(pdm);
      if (!report.transitive()) err << "query " << s.query_id << ": " << report.violations << " intransitive triples; ";
      problems[i] = err.str();
    });
  }

  std::ostringstream os;
  for (std::size_t i = 0; i < samples.size(); ++i) os << samples[i].query_id << '\t' << join_ranks(results[i].rank) << '\n';
  if (o.out.empty()) {
    std::cout << os.str();
  } else {
    write_text(o.out, os.str());
  }
  bool failed = false;
  for (const std::string& p : problems) {
    if (p.empty()) continue;
    std::cerr << "paranoid check failed: " << p << "\n";
    failed = true;
  }
  if (failed) throw CheckFailure("pair cross-check found mismatches");
  return kOk;
}

int cmd_eval(const std::string& data, const std::string& ranking_path) {
  require_file(data, "dataset");
  require_file(ranking_path, "ranking");
  const std::vector<QuerySample> samples = load_dataset(data, true);
  std::unordered_map<std::string, std::vector<std::size_t>> ranks;
  std::ifstream in(ranking_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = ranking_path + ":" + std::to_string(line_no) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + "expected query_id<TAB>ranks");
    std::vector<std::size_t> r;
    std::istringstream fields(line.substr(tab + 1));
    std::string field;
    while (std::getline(fields, field, ',')) {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError(where + "bad rank '" + field + "'");
      }
      r.push_back(v);
    }
    std::vector<std::size_t> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (sorted[k] != k + 1) throw DataError(where + "ranks are not a permutation of 1.." + std::to_string(r.size()));
    }
    if (!ranks.emplace(line.substr(0, tab), std::move(r)).second) {
      throw DataError(where + "duplicate query id " + line.substr(0, tab));
    }
  }
  if (samples.empty()) throw DataError("dataset " + data + " is empty");
  double sum = 0.0;
  for (const QuerySample& s : samples) {
    auto it = ranks.find(s.query_id);
    if (it == ranks.end()) throw DataError("no ranking for query " + s.query_id);
    if (it->second.size() != s.passages.size()) {
      throw DataError("ranking for query " + s.query_id + " has " + std::to_string(it->second.size()) +
                      " entries, dataset has " + std::to_string(s.passages.size()) + " passages");
    }
    sum += 1.0 / static_cast<double>(it->second[*s.gold_index]);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", sum / static_cast<double>(samples.size()));
  std::cout << buf << "\n";
  return kOk;
}

int cmd_gradcheck(const ModelConfig& config, std::uint64_t seed) {
  const GradCheckInstance inst = make_gradcheck_instance(config, seed);
  const GradCheckReport report = gradient_check(inst.params, inst.sample, inst.triple);
  char line[128];
  std::snprintf(line, sizeof line, "%-22s %8s %14s %14s\n", "parameter", "entries", "max_rel_error", "max_abs_grad");
  std::cout << line;
  for (const ParamGradCheck& p : report.params) {
    std::snprintf(line, sizeof line, "%-22s %8zu %14.3e %14.3e\n", p.name.c_str(), p.entries, p.max_rel_error,
                  p.max_abs_grad);
    std::cout << line;
  }
  std::snprintf(line, sizeof line, "max relative error %.3e (threshold %.0e)\n", report.max_rel_error,
                kGradCheckTolerance);
  std::cout << line;
  if (!report.passed()) throw CheckFailure("gradient check exceeded the threshold");
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Pairwise passage reranker: data preparation, training, ranking and evaluation"};
  app.name("pairrank");
  app.require_subcommand(1);

  std::string data, out;
  std::size_t min_frequency = kDefaultMinFrequency;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the frequency-thresholded vocabulary TSV");
  vocab_cmd->add_option("--data", data, "dataset TSV")->required();
  vocab_cmd->add_option("--out", out, "output vocabulary TSV")->required();
  vocab_cmd->add_option("--min-frequency", min_frequency, "keep tokens seen at least this often")
      ->capture_default_str();

  auto* stats_cmd = app.add_subcommand("build-stats", "Compute document-frequency statistics of a dataset");
  stats_cmd->add_option("--data", data, "dataset TSV")->required();
  stats_cmd->add_option("--out", out, "output stats file")->required();

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset and matching embedding banks");
  synth_cmd->add_option("--out", out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--train-queries", synth.train_queries, "queries in train.tsv")->capture_default_str();
  synth_cmd->add_option("--dev-queries", synth.dev_queries, "queries in dev.tsv")->capture_default_str();
  synth_cmd->add_option("--dim", synth.dim, "embedding dimension")->capture_default_str();
  synth_cmd->add_option("--inventory", synth.inventory, "distinct tokens")->capture_default_str();
  synth_cmd->add_option("--vector-range", synth.vector_range, "bank components uniform in [-r, r]")
      ->capture_default_str();

  std::string config_path;
  std::map<std::string, std::string> overrides;
  auto* train_cmd = app.add_subcommand("train", "Train the pairwise model; writes checkpoints and train.log");
  train_cmd->add_option("--config", config_path, "key=value config file; flags below override it");
  for (const RunConfig::Key& k : RunConfig::keys()) {
    std::string help = k.help;
    if (*k.default_value) help += " (default " + std::string(k.default_value) + ")";
    train_cmd->add_option("--" + dashed(k.name), overrides[k.name], help);
  }

  RankOptions rank;
  auto* rank_cmd = app.add_subcommand("rank", "Rank passages; prints query_id<TAB>rank_1,...,rank_N");
  rank_cmd->add_option("--data", rank.data, "dataset TSV (labels ignored)")->required();
  rank_cmd->add_option("--run", rank.run, "training output directory");
  rank_cmd->add_option("--checkpoint", rank.checkpoint, "checkpoint file (default <run>/model.ckpt)");
  rank_cmd->add_option("--out", rank.out, "ranking TSV (default stdout)");
  rank_cmd->add_option("--scorer", rank.scorer, "model or bm25")->capture_default_str();
  rank_cmd->add_option("--stats", rank.stats, "corpus stats for the bm25 scorer (default <run>/corpus_stats.txt)");
  rank_cmd->add_flag("--exact", rank.exact, "use the exact tournament path instead of row sums");
  rank_cmd->add_flag("--paranoid", rank.paranoid, "re-score every pair through the pair network and compare");
  rank_cmd->add_option("--threads", rank.threads, "worker threads")->capture_default_str();

  std::string ranking_path;
  auto* eval_cmd = app.add_subcommand("eval", "Print the MRR of a ranking TSV against a labeled dataset");
  eval_cmd->add_option("--data", data, "labeled dataset TSV")->required();
  eval_cmd->add_option("--ranking", ranking_path, "ranking TSV")->required();

  ModelConfig gc = tiny_config();
  gc.init_range = 0.1;
  std::uint64_t gc_seed = 1;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare tape gradients with central differences");
  gc_cmd->add_option("--seed", gc_seed, "instance seed")->capture_default_str();
  gc_cmd->add_option("--embed-dim", gc.embed_dim, "embedding dimension")->capture_default_str();
  gc_cmd->add_option("--hidden", gc.hidden, "LSTM hidden size")->capture_default_str();
  gc_cmd->add_option("--lstm-layers", gc.lstm_layers, "LSTM layers")->capture_default_str();
  gc_cmd->add_option("--max-query-len", gc.max_query_len, "query capacity")->capture_default_str();
  gc_cmd->add_option("--max-doc-len", gc.max_doc_len, "passage capacity")->capture_default_str();
  gc_cmd->add_option("--init-range", gc.init_range, "parameter init range")->capture_default_str();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*vocab_cmd) return cmd_build_vocab(data, out, min_frequency);
    if (*stats_cmd) return cmd_build_stats(data, out);
    if (*synth_cmd) {
      synthesize(out, synth);
      return kOk;
    }
    if (*train_cmd) {
      RunConfig config = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
      for (const RunConfig::Key& k : RunConfig::keys()) {
        if (train_cmd->count("--" + dashed(k.name)) > 0) config.set(k.name, overrides[k.name]);
      }
      return cmd_train(config);
    }
    if (*rank_cmd) return cmd_rank(rank);
    if (*eval_cmd) return cmd_eval(data, ranking_path);
    if (*gc_cmd) return cmd_gradcheck(gc, gc_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace pairrank::cli
