#pragma once

// Command-line front end. run_cli is the whole program; main() only forwards
// argv. Exit codes: 0 success, 1 usage, 2 data error, 3 check failure.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pairrank/gradcheck.hpp"
#include "pairrank/model.hpp"
#include "pairrank/training.hpp"

namespace pairrank::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kCheckFailed = 3 };

// Merged model/training/path settings. Every key has a default; unknown keys
// are rejected.
class RunConfig {
 public:
  struct Key {
    const char* name;
    const char* default_value;
    const char* help;
  };
  static const std::vector<Key>& keys();

  RunConfig();
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  // key=value lines in key-table order.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t train_queries = 200;
  std::size_t dev_queries = 50;
  std::size_t dim = 32;
  std::size_t inventory = 400;
  double vector_range = 0.1;  // bank components uniform in [-r, r]
};

// Writes train.tsv, dev.tsv and the embedding banks (w2v.vec, glove.vec,
// fasttext.vec, fasttext.subwords.vec) into out_dir.
void synthesize(const std::string& out_dir, const SynthOptions& options);

// embed_dim 12, hidden 8, one layer, query 4, doc 6, no dropout.
ModelConfig tiny_config();

struct GradCheckInstance {
  ModelParams params;
  PreparedSample sample;
  TrainingTriple triple;
};

// Random parameters, banks and a two-passage query. The query holds one token
// outside the vocabulary and the second passage is shorter than the capacity,
// so the FastText fallback and padding masks are exercised.
GradCheckInstance make_gradcheck_instance(const ModelConfig& config, std::uint64_t seed);

int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace pairrank::cli
