#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pairrank/model.hpp"
#include "pairrank/training.hpp"

namespace pairrank {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// entries whose true gradient is zero from dividing rounding noise by ~0.
inline constexpr double kGradCheckFloor = 1e-6;

double gradcheck_relative_error(double analytic, double numeric, double floor = kGradCheckFloor);

struct ParamGradCheck {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradCheck> params;
  double max_rel_error = 0.0;
  bool passed(double tolerance = kGradCheckTolerance) const { return max_rel_error < tolerance; }
};

// Compares the tape gradient of the triple's loss (eval mode, no dropout)
// with central differences for every entry of every parameter.
GradCheckReport gradient_check(const ModelParams& params, const PreparedSample& sample,
                               const TrainingTriple& triple, double step = kGradCheckStep);

}  // namespace pairrank
