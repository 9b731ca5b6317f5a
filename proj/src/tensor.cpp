#include "pairrank/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include "pairrank/rng.hpp"

namespace pairrank {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

#ifndef NDEBUG
void check_finite(const Matrix& m, const char* op) {
  for (double v : m.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(op) + ": non-finite value");
    }
  }
}
#else
void check_finite(const Matrix&, const char*) {}
#endif

enum class Broadcast { Column, Row, Scalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (b.rows == 1 && b.cols == 1) return Broadcast::Scalar;
  if (b.cols == 1 && b.rows == a.rows) return Broadcast::Column;
  if (b.rows == 1 && b.cols == a.cols) return Broadcast::Row;
  throw ShapeError(std::string(op) + ": cannot broadcast " + b.shape_string() +
                   " over " + a.shape_string());
}

std::size_t broadcast_index(Broadcast kind, std::size_t r, std::size_t c) {
  switch (kind) {
    case Broadcast::Column:
      return r;
    case Broadcast::Row:
      return c;
    case Broadcast::Scalar:
      break;
  }
  return 0;
}

// g += a * b (no shape checks; caller guarantees compatibility)
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* orow = &out.data[i * out.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.data[i * a.cols + k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
}

}  // namespace

// ---- Matrix ---------------------------------------------------------------

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("Matrix: " + std::to_string(data.size()) +
                     " values for shape " + shape_string());
  }
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << '[' << rows << 'x' << cols << ']';
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: inner dimensions differ " + a.shape_string() +
                     " * " + b.shape_string());
  }
  Matrix out(a.rows, b.cols);
  matmul_accumulate(a, b, out);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) out(c, r) = a(r, c);
  return out;
}

Matrix softmax_cols(const Matrix& m, const std::vector<bool>* mask) {
  if (mask && mask->size() != m.size()) {
    throw ShapeError("softmax_cols: mask size does not match " + m.shape_string());
  }
  auto masked = [&](std::size_t r, std::size_t c) {
    return mask && (*mask)[r * m.cols + c];
  };
  Matrix out(m.rows, m.cols);
  for (std::size_t c = 0; c < m.cols; ++c) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m.rows; ++r)
      if (!masked(r, c)) top = std::max(top, m(r, c));
    if (top == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("softmax_cols: column " + std::to_string(c) +
                                  " is fully masked");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (masked(r, c)) continue;
      const double e = std::exp(m(r, c) - top);
      out(r, c) = e;
      total += e;
    }
    for (std::size_t r = 0; r < m.rows; ++r) out(r, c) /= total;
  }
  return out;
}

// ---- Var / Tape -----------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& m = value();
  if (m.size() != 1) throw ShapeError("scalar(): node is " + m.shape_string());
  return m.data[0];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::reference(const Matrix& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Matrix& value, std::size_t slot) {
  Node n;
  n.external = &value;
  n.needs_grad = true;
  n.slot = static_cast<std::ptrdiff_t>(slot);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, Backward backward) {
  check_finite(value, "tape");
  Node n;
  n.value = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                             [&](std::size_t i) { return nodes_[i].needs_grad; });
  if (n.needs_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix(v.rows, v.cols);
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + loss.value().shape_string());
  }
  if (swept_) throw std::logic_error("backward: tape already swept");
  swept_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id()).data[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

void Tape::accumulate_parameter_grads(std::vector<Matrix>& out) const {
  for (const Node& n : nodes_) {
    if (n.slot < 0 || n.grad.size() == 0) continue;
    Matrix& dst = out.at(static_cast<std::size_t>(n.slot));
    require_same_shape(dst, n.grad, "accumulate_parameter_grads");
    for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += n.grad.data[k];
  }
}

// ---- ops ------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(matmul(a.value(), b.value()), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) matmul_accumulate(g, transpose(t.value(ib)), t.grad(ia));
    if (t.needs_grad(ib)) matmul_accumulate(transpose(t.value(ia)), g, t.grad(ib));
  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(transpose(a.value()), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) ga(c, r) += g(r, c);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tape& t = a.tape();
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += bv.data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t in : {ia, ib}) {
      if (!t.needs_grad(in)) continue;
      Matrix& gi = t.grad(in);
      for (std::size_t k = 0; k < g.size(); ++k) gi.data[k] += g.data[k];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tape& t = a.tape();
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= bv.data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Matrix& ga = t.grad(ia);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
    }
    if (t.needs_grad(ib)) {
      Matrix& gb = t.grad(ib);
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] -= g.data[k];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tape& t = a.tape();
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= bv.data[k];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Matrix& ga = t.grad(ia);
      const Matrix& bv = t.value(ib);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * bv.data[k];
    }
    if (t.needs_grad(ib)) {
      Matrix& gb = t.grad(ib);
      const Matrix& av = t.value(ia);
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k] * av.data[k];
    }
  });
}

Var add_broadcast(Var a, Var b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add_broadcast");
  Tape& t = a.tape();
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      out(r, c) += bv.data[broadcast_index(kind, r, c)];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib, kind](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Matrix& ga = t.grad(ia);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
    }
    if (t.needs_grad(ib)) {
      Matrix& gb = t.grad(ib);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c)
          gb.data[broadcast_index(kind, r, c)] += g(r, c);
    }
  });
}

Var mul_broadcast(Var a, Var b) {
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul_broadcast");
  Tape& t = a.tape();
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      out(r, c) *= bv.data[broadcast_index(kind, r, c)];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib, kind](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    if (t.needs_grad(ia)) {
      Matrix& ga = t.grad(ia);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c)
          ga(r, c) += g(r, c) * bv.data[broadcast_index(kind, r, c)];
    }
    if (t.needs_grad(ib)) {
      Matrix& gb = t.grad(ib);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c)
          gb.data[broadcast_index(kind, r, c)] += g(r, c) * av(r, c);
    }
  });
}

Var scale(Var a, double factor) {
  Tape& t = a.tape();
  Matrix out = a.value();
  for (double& v : out.data) v *= factor;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * factor;
  });
}

Var tanh(Var a) {
  Tape& t = a.tape();
  Matrix out = a.value();
  for (double& v : out.data) v = std::tanh(v);
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k)
      ga.data[k] += g.data[k] * (1.0 - y.data[k] * y.data[k]);
  });
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  Matrix out = a.value();
  for (double& v : out.data) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k)
      ga.data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
  });
}

Var softmax_cols(Var m, const std::vector<bool>* mask) {
  Tape& t = m.tape();
  const std::size_t im = m.id();
  return t.record(softmax_cols(m.value(), mask), {im}, [im](Tape& t, std::size_t self) {
    // dx = y * (g - sum_r(g * y)) per column; masked entries have y = 0.
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& gm = t.grad(im);
    for (std::size_t c = 0; c < y.cols; ++c) {
      double dot = 0.0;
      for (std::size_t r = 0; r < y.rows; ++r) dot += g(r, c) * y(r, c);
      for (std::size_t r = 0; r < y.rows; ++r) gm(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: width mismatch " + parts.front().value().shape_string() +
                       " vs " + p.value().shape_string());
    }
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset * cols));
    offset += v.rows;
  }
  return t.record(std::move(out), ids, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t in : ids) {
      const std::size_t n = t.value(in).size();
      if (t.needs_grad(in)) {
        Matrix& gi = t.grad(in);
        for (std::size_t k = 0; k < n; ++k) gi.data[k] += g.data[offset + k];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: height mismatch " + parts.front().value().shape_string() +
                       " vs " + p.value().shape_string());
    }
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols; ++c) out(r, offset + c) = v(r, c);
    offset += v.cols;
  }
  return t.record(std::move(out), ids, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t in : ids) {
      const std::size_t w = t.value(in).cols;
      if (t.needs_grad(in)) {
        Matrix& gi = t.grad(in);
        for (std::size_t r = 0; r < g.rows; ++r)
          for (std::size_t c = 0; c < w; ++c) gi(r, c) += g(r, offset + c);
      }
      offset += w;
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& v = a.value();
  if (begin + count > v.rows) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + v.shape_string());
  }
  Matrix out(count, v.cols);
  std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(begin * v.cols), count * v.cols,
              out.data.begin());
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    const std::size_t offset = begin * ga.cols;
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[offset + k] += g.data[k];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& v = a.value();
  if (begin + count > v.cols) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + v.shape_string());
  }
  Matrix out(v.rows, count);
  for (std::size_t r = 0; r < v.rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = v(r, begin + c);
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) ga(r, begin + c) += g(r, c);
  });
}

Var max_cols(Var a) {
  const Matrix& v = a.value();
  if (v.cols == 0) throw ShapeError("max_cols: no columns in " + v.shape_string());
  Matrix out(v.rows, 1);
  std::vector<std::size_t> argmax(v.rows, 0);
  for (std::size_t r = 0; r < v.rows; ++r) {
    double best = v(r, 0);
    for (std::size_t c = 1; c < v.cols; ++c) {
      if (v(r, c) > best) {
        best = v(r, c);
        argmax[r] = c;
      }
    }
    out(r, 0) = best;
  }
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, argmax = std::move(argmax)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t r = 0; r < g.rows; ++r) ga(r, argmax[r]) += g(r, 0);
  });
}

Var dropout(Var a, double p, bool train, std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!train || p == 0.0) return a;
  const Matrix& v = a.value();
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(v.rows, v.cols);
  for (double& m : mask.data) m = uniform01(rng) < p ? 0.0 : keep_scale;
  Matrix out = v;
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= mask.data[k];
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, mask = std::move(mask)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * mask.data[k];
  });
}

Var log_floor(Var a, double floor) {
  Tape& t = a.tape();
  Matrix out = a.value();
  for (double& v : out.data) v = std::log(std::max(v, floor));
  const std::size_t ia = a.id();
  return t.record(std::move(out), {ia}, [ia, floor](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k)
      if (x.data[k] > floor) ga.data[k] += g.data[k] / x.data[k];
  });
}

Var sum(Var a) {
  Tape& t = a.tape();
  double total = 0.0;
  for (double v : a.value().data) total += v;
  const std::size_t ia = a.id();
  return t.record(Matrix::scalar(total), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self).data[0];
    for (double& v : t.grad(ia).data) v += g;
  });
}

}  // namespace pairrank
