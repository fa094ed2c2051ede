#include "msfda/numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msfda/error.hpp"

namespace msfda::ad {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var{this, nodes_.size() - 1};
}

const Matrix& Tape::gradient(Var v) const {
  const Node& node = nodes_[v.index];
  if (!node.needs_grad) throw ShapeError("gradient requested for a constant");
  return node.grad;
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, Backprop backprop) {
  bool needs = false;
  for (std::size_t i : inputs) needs = needs || nodes_[i].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backprop) : Backprop{}, needs});
  return Var{this, nodes_.size() - 1};
}

Matrix& Tape::grad_ref(std::size_t index) {
  Node& node = nodes_[index];
  if (node.grad.size() != node.value.size() || !node.grad.same_shape(node.value)) {
    node.grad = Matrix(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

void Tape::backward(Var output) {
  const Matrix& out = nodes_[output.index].value;
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward() needs a 1x1 output");
  for (Node& node : nodes_)
    if (node.needs_grad) node.grad = Matrix(node.value.rows(), node.value.cols());
  if (!nodes_[output.index].needs_grad) return;
  nodes_[output.index].grad(0, 0) = 1.0;
  for (std::size_t i = output.index + 1; i-- > 0;) {
    if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
  }
}

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ShapeError("operands recorded on different tapes");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

// Accumulates `delta` (same shape) into the gradient of node `i` if tracked.
void accumulate(Tape& t, std::size_t i, const Matrix& delta) {
  if (!t.needs_grad(i)) return;
  auto dst = t.grad_ref(i).values();
  auto src = delta.values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

template <typename Fn>
Var unary(Var a, Matrix value, Fn local_grad) {
  const std::size_t ia = a.index;
  return a.tape->record(std::move(value), {ia}, [ia, local_grad](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const auto& x = t.value(Var{&t, ia}).values();
    const auto& y = t.value(Var{&t, self}).values();
    const auto& g = t.grad_of(self).values();
    auto dst = t.grad_ref(ia).values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k] * local_grad(x[k], y[k]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Matrix value = msfda::matmul(a.value(), b.value());
  const std::size_t ia = a.index, ib = b.index;
  return a.tape->record(std::move(value), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_of(self);
    if (t.needs_grad(ia)) accumulate(t, ia, msfda::matmul(g, transpose(t.value(Var{&t, ib}))));
    if (t.needs_grad(ib)) accumulate(t, ib, msfda::matmul(transpose(t.value(Var{&t, ia})), g));
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Matrix value = a.value();
  auto dst = value.values();
  auto src = b.value().values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  const std::size_t ia = a.index, ib = b.index;
  return a.tape->record(std::move(value), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_of(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  const Matrix& x = a.value();
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) throw ShapeError("add_row: bias width mismatch");
  Matrix value = x;
  for (std::size_t i = 0; i < value.rows(); ++i) {
    auto out = value.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += r(0, j);
  }
  const std::size_t ia = a.index, ir = row.index;
  return a.tape->record(std::move(value), {ia, ir}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_of(self);
    accumulate(t, ia, g);
    if (t.needs_grad(ir)) {
      Matrix& dst = t.grad_ref(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) dst(0, j) += g(i, j);
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Matrix value = a.value();
  auto dst = value.values();
  auto src = b.value().values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] *= src[k];
  const std::size_t ia = a.index, ib = b.index;
  return a.tape->record(std::move(value), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const auto g = t.grad_of(self).values();
    const auto xa = t.value(Var{&t, ia}).values();
    const auto xb = t.value(Var{&t, ib}).values();
    if (t.needs_grad(ia)) {
      auto d = t.grad_ref(ia).values();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += g[k] * xb[k];
    }
    if (t.needs_grad(ib)) {
      auto d = t.grad_ref(ib).values();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += g[k] * xa[k];
    }
  });
}

Var scale(Var a, double factor) {
  Matrix value = a.value();
  for (double& v : value.values()) v *= factor;
  return unary(a, std::move(value), [factor](double, double) { return factor; });
}

Var relu(Var a) {
  Matrix value = a.value();
  for (double& v : value.values()) v = v > 0.0 ? v : 0.0;
  // subgradient 0 at exactly 0
  return unary(a, std::move(value), [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var a) {
  Matrix value = msfda::softmax_rows(a.value());
  const std::size_t ia = a.index;
  return a.tape->record(std::move(value), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(Var{&t, self});
    const Matrix& g = t.grad_of(self);
    Matrix& dst = t.grad_ref(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) dst(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_floor(Var a, double floor) {
  Matrix value = a.value();
  for (double& v : value.values()) v = std::log(std::max(v, floor));
  return unary(a, std::move(value),
               [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var clamp(Var a, double lo, double hi) {
  Matrix value = a.value();
  for (double& v : value.values()) v = std::clamp(v, lo, hi);
  return unary(a, std::move(value),
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var log_sigmoid(Var a) {
  Matrix value = a.value();
  // log sigma(x) = -softplus(-x)
  for (double& v : value.values()) v = v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
  // d/dx log sigma(x) = 1 - sigma(x) = sigma(-x)
  return unary(a, std::move(value), [](double x, double) {
    return x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
  });
}

Var pick(Var a, std::span<const std::size_t> labels) {
  const Matrix& x = a.value();
  if (labels.size() != x.rows()) throw ShapeError("pick: one label per row required");
  Matrix value(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (labels[i] >= x.cols()) throw ShapeError("pick: label out of range");
    value(i, 0) = x(i, labels[i]);
  }
  std::vector<std::size_t> picked(labels.begin(), labels.end());
  const std::size_t ia = a.index;
  return a.tape->record(std::move(value), {ia},
                        [ia, picked = std::move(picked)](Tape& t, std::size_t self) {
                          const Matrix& g = t.grad_of(self);
                          Matrix& dst = t.grad_ref(ia);
                          for (std::size_t i = 0; i < picked.size(); ++i)
                            dst(i, picked[i]) += g(i, 0);
                        });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.index;
  return a.tape->record(Matrix(1, 1, total), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)(0, 0);
    for (double& d : t.grad_ref(ia).values()) d += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mean_rows(Var a) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw ShapeError("mean_rows of an empty matrix");
  Matrix value(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) value(0, j) += x(i, j);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (double& v : value.values()) v *= inv;
  const std::size_t ia = a.index;
  return a.tape->record(std::move(value), {ia}, [ia, inv](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_of(self);
    Matrix& dst = t.grad_ref(ia);
    for (std::size_t i = 0; i < dst.rows(); ++i)
      for (std::size_t j = 0; j < dst.cols(); ++j) dst(i, j) += g(0, j) * inv;
  });
}

Var sum_cols(Var a) {
  const Matrix& x = a.value();
  Matrix value(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (double v : x.row(i)) value(i, 0) += v;
  const std::size_t ia = a.index;
  return a.tape->record(std::move(value), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad_of(self);
    Matrix& dst = t.grad_ref(ia);
    for (std::size_t i = 0; i < dst.rows(); ++i)
      for (std::size_t j = 0; j < dst.cols(); ++j) dst(i, j) += g(i, 0);
  });
}

}  // namespace msfda::ad
