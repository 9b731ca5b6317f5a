#include "pairrank/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace pairrank {

double gradcheck_relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / scale;
}

GradCheckReport gradient_check(const ModelParams& params, const PreparedSample& sample,
                               const TrainingTriple& triple, double step) {
  std::vector<Matrix> analytic = params.zero_grads();
  triple_loss_and_grad(params, sample, triple, false, 0, &analytic);

  ModelParams probe = params;
  GradCheckReport report;
  for (std::size_t slot = 0; slot < probe.count(); ++slot) {
    ParamGradCheck entry;
    entry.name = probe.name(slot);
    Matrix& m = probe.value(slot);
    entry.entries = m.size();
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double original = m.data[k];
      m.data[k] = original + step;
      const double plus = triple_loss_and_grad(probe, sample, triple, false, 0, nullptr);
      m.data[k] = original - step;
      const double minus = triple_loss_and_grad(probe, sample, triple, false, 0, nullptr);
      m.data[k] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[slot].data[k];
      entry.max_rel_error = std::max(entry.max_rel_error, gradcheck_relative_error(a, numeric));
      entry.max_abs_grad = std::max(entry.max_abs_grad, std::fabs(a));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  return report;
}

}  // namespace pairrank
