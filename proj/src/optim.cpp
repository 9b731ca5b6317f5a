#include "pairrank/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pairrank {

double global_norm(const std::vector<Matrix>& grads) {
  double total = 0.0;
  for (const Matrix& g : grads)
    for (double v : g.data) total += v * v;
  return std::sqrt(total);
}

double clip_global_norm(std::vector<Matrix>& grads, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("clip_global_norm: threshold must be > 0");
  const double norm = global_norm(grads);
  if (norm > threshold) {
    const double factor = threshold / norm;
    for (Matrix& g : grads)
      for (double& v : g.data) v *= factor;
  }
  return norm;
}

Adam::Adam(const std::vector<Matrix>& params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Matrix& p : params) {
    m_.emplace_back(p.rows, p.cols);
    v_.emplace_back(p.rows, p.cols);
  }
}

void Adam::step(std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam::step: expected " + std::to_string(m_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (!params[i]->same_shape(m_[i]) || !grads[i].same_shape(m_[i])) {
      throw ShapeError("Adam::step: parameter " + std::to_string(i) + " has shape " +
                       params[i]->shape_string() + ", gradient " + grads[i].shape_string() +
                       ", state " + m_[i].shape_string());
    }
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = grads[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m.data[k] = b1 * m.data[k] + (1.0 - b1) * g.data[k];
      v.data[k] = b2 * v.data[k] + (1.0 - b2) * g.data[k] * g.data[k];
      const double m_hat = m.data[k] / correction1;
      const double v_hat = v.data[k] / correction2;
      p.data[k] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  std::vector<Matrix*> ptrs;
  ptrs.reserve(params.size());
  for (Matrix& p : params) ptrs.push_back(&p);
  step(ptrs, grads);
}

}  // namespace pairrank
