#pragma once

// Binary checkpoint container, little-endian throughout:
//
//   "PRNKCKPT"            8-byte magic
//   u32 version
//   u32 n, n bytes        model config as key=value lines
//   u64                   vocabulary fingerprint
//   u64                   epoch
//   6 x f64               feature norm means, then stddevs
//   u32 count             parameter records follow
//     u32 n, n bytes      name
//     u32 rank, rank x u64 dims
//     prod(dims) x f64    row-major values
//
// Nothing may follow the last record.

#include <cstdint>
#include <string>

#include "pairrank/features.hpp"
#include "pairrank/model.hpp"

namespace pairrank {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelParams params;
  NormStats norm;
  std::uint64_t vocab_fingerprint = 0;
  std::uint64_t epoch = 0;

  const ModelConfig& config() const { return params.config(); }
  bool operator==(const Checkpoint&) const = default;
};

std::string model_config_to_text(const ModelConfig& config);
// Rejects unknown keys.
ModelConfig model_config_from_text(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// With `expected`, every record's shape is checked against the parameters
// that config would create, and a mismatch names the parameter.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace pairrank
