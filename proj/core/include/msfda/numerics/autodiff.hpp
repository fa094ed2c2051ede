#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "msfda/numerics/matrix.hpp"

namespace msfda::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t index = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records matrix operations and replays them in reverse to accumulate
/// gradients. Nodes are append-only; a Var stays valid for the tape's life.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose gradient is accumulated by backward().
  Var variable(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.index].value; }
  /// Gradient of the last backward() output with respect to `v`.
  const Matrix& gradient(Var v) const;

  /// Reverse sweep from a 1x1 output.
  void backward(Var output);

  // Used by the operation implementations.
  using Backprop = std::function<void(Tape&, std::size_t self)>;
  Var record(Matrix value, std::vector<std::size_t> inputs, Backprop backprop);
  Matrix& grad_ref(std::size_t index);
  const Matrix& grad_of(std::size_t index) const { return nodes_[index].grad; }
  bool needs_grad(std::size_t index) const { return nodes_[index].needs_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1 x cols row to every row of `a`.
Var add_row(Var a, Var row);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var softmax_rows(Var a);
/// log(max(a, floor)); gradient is zero where the floor is active.
Var log_floor(Var a, double floor);
/// Elementwise clamp to [lo, hi]; gradient is zero outside.
Var clamp(Var a, double lo, double hi);
/// Numerically stable log(1 / (1 + exp(-a))).
Var log_sigmoid(Var a);
/// Column vector holding a(i, labels[i]).
Var pick(Var a, std::span<const std::size_t> labels);
Var sum(Var a);
Var mean(Var a);
/// 1 x cols vector of column means.
Var mean_rows(Var a);
/// rows x 1 vector of row sums.
Var sum_cols(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace msfda::ad
