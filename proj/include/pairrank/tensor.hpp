#pragma once

// Dense row-major matrices and a define-by-run reverse-mode tape.
//
// Everything in the network is a 2-D matrix: vectors are single columns
// (n x 1) or single rows (1 x n), scalars are 1 x 1. A Tape records every op
// applied to Var handles; backward() walks the records in reverse and
// accumulates gradients. Leaves bound to trainable parameters carry a slot
// index so their gradients can be collected after the sweep.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairrank {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);
  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_string() const;

  bool operator==(const Matrix&) const = default;
};

// Plain (untaped) kernels shared by the tape ops and by callers that only
// need values.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Per-column softmax. mask[r*cols+c] == true excludes entry (r, c); excluded
// entries come out exactly 0. Throws if a column is fully masked.
Matrix softmax_cols(const Matrix& m, const std::vector<bool>* mask = nullptr);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant input (embedding vectors, hand-crafted features).
  Var constant(Matrix value);
  // Constant that references value instead of copying it.
  Var reference(const Matrix& value);
  // Trainable leaf. The matrix is referenced, not copied; it must outlive the
  // tape. slot identifies the parameter when collecting gradients.
  Var parameter(const Matrix& value, std::size_t slot);

  Var record(Matrix value, std::vector<std::size_t> inputs, Backward backward);

  const Matrix& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, zero-initialized on first access.
  Matrix& grad(std::size_t id);
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a 1x1 loss. May be called once per tape.
  void backward(Var loss);

  // Adds each parameter leaf's gradient into out[slot]. out must already hold
  // zero (or running) matrices shaped like the parameters.
  void accumulate_parameter_grads(std::vector<Matrix>& out) const;

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    bool needs_grad = false;
    std::ptrdiff_t slot = -1;
  };
  std::vector<Node> nodes_;
  bool swept_ = false;
};

// ---- differentiable ops ---------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// b is broadcast over a: b may be a column (rows x 1), a row (1 x cols) or a
// 1 x 1 scalar.
Var add_broadcast(Var a, Var b);
Var mul_broadcast(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax_cols(Var m, const std::vector<bool>* mask = nullptr);
// Vertical stack (heights add) and horizontal join (widths add).
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
// Max over columns for every row: r x c -> r x 1. Ties go to the first
// column; gradient flows only to the recorded argmax.
Var max_cols(Var a);
// Inverted dropout. Identity when !train or p == 0.
Var dropout(Var a, double p, bool train, std::mt19937_64& rng);
// Elementwise natural log of max(a, floor).
Var log_floor(Var a, double floor);
Var sum(Var a);

}  // namespace pairrank
