#pragma once

#include <cstdint>
#include <vector>

#include "pairrank/tensor.hpp"

namespace pairrank {

// Global L2 norm over every gradient entry.
double global_norm(const std::vector<Matrix>& grads);

// Rescales all gradients by threshold / norm when the global norm exceeds
// threshold. Returns the norm measured before clipping.
double clip_global_norm(std::vector<Matrix>& grads, double threshold);

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const std::vector<Matrix>& params, AdamOptions options = {});

  // One bias-corrected update. params and grads must mirror the shapes the
  // optimizer was constructed with.
  void step(std::vector<Matrix*>& params, const std::vector<Matrix>& grads);
  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace pairrank
