// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense 2-D values.
//
// A Tape records every primitive in creation order, so the record is already
// topologically sorted and backward() is a single reverse sweep. Tapes are
// rebuilt for every forward pass. Trainable parameters enter through
// Tape::param(), which binds a leaf to an external Tensor; backward() adds the
// leaf's gradient into Tensor::grad so gradients accumulate across examples
// until the caller zeroes them.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmgnn/error.hpp"
#include "dmgnn/tensor.hpp"

namespace dmgnn::ad {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] const Matrix& grad() const;
  [[nodiscard]] std::size_t rows() const { return value().rows; }
  [[nodiscard]] std::size_t cols() const { return value().cols; }
  [[nodiscard]] double scalar() const { return value().data.at(0); }
  [[nodiscard]] bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m) { return push(std::move(m), false, {}, nullptr); }
  Var leaf(Matrix m, bool requires_grad = true) { return push(std::move(m), requires_grad, {}, nullptr); }

  /// Leaf bound to an external parameter. Repeated calls return the same node.
  Var param(Tensor& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.external = &p.value;
    n.bound = &p;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    const std::size_t id = nodes_.size() - 1;
    param_nodes_.emplace(&p, id);
    return {this, id};
  }

  Var push(Matrix value, bool requires_grad, std::vector<std::size_t> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  [[nodiscard]] const Matrix& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.value;
  }

  [[nodiscard]] const Matrix& grad(std::size_t id) const {
    Node& n = const_cast<Node&>(nodes_[id]);
    ensure_grad(n);
    return n.grad;
  }

  /// Gradient slot for accumulation; allocated lazily.
  Matrix& grad_mut(std::size_t id) {
    Node& n = nodes_[id];
    ensure_grad(n);
    return n.grad;
  }

  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  /// Populates gradients of everything reachable from a scalar root.
  /// Interior gradients are recomputed per call; leaf and parameter gradients
  /// accumulate across calls.
  void backward(Var root) {
    if (&root.tape() != this) throw InputError("backward: root belongs to another tape");
    const Matrix& rv = value(root.id());
    if (rv.rows != 1 || rv.cols != 1) throw InputError("backward: root must be scalar, got " + rv.shape_str());
    for (Node& n : nodes_) {
      if (!n.is_leaf()) n.grad = Matrix();
    }
    for (Node& n : nodes_) {
      if (n.bound != nullptr) n.grad = Matrix();
    }
    if (!nodes_[root.id()].requires_grad) return;
    grad_mut(root.id()).data[0] += 1.0;
    for (std::size_t k = root.id() + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, k);
    }
    for (Node& n : nodes_) {
      if (n.bound != nullptr && !n.grad.empty()) linalg::axpy(1.0, n.grad, n.bound->grad);
    }
  }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Tensor* bound = nullptr;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;

    [[nodiscard]] bool is_leaf() const { return !backward; }
  };

  void ensure_grad(Node& n) const {
    const Matrix& v = n.external != nullptr ? *n.external : n.value;
    if (n.grad.rows != v.rows || n.grad.cols != v.cols || n.grad.data.size() != v.data.size()) {
      n.grad = Matrix(v.rows, v.cols);
    }
  }

  std::deque<Node> nodes_;  // stable references across push
  std::unordered_map<const Tensor*, std::size_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw InputError("operands live on different tapes");
  return a.tape();
}

inline void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Unary pointwise op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var pointwise(const Var& x, Fwd fwd, Deriv deriv) {
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  Matrix out(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.data.size(); ++i) out.data[i] = fwd(xv.data[i]);
  const std::size_t xi = x.id();
  return t.push(std::move(out), x.requires_grad(), {xi}, [xi, deriv](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xval = tp.value(xi);
    const Matrix& yval = tp.value(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i] * deriv(xval.data[i], yval.data[i]);
  });
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) throw DimensionError("matmul: inner dimensions differ " + av.shape_str() + " x " + bv.shape_str());
  Matrix out(av.rows, bv.cols);
  linalg::gemm_nn(av, bv, out, true);
  const std::size_t ai = a.id(), bi = b.id();
  const bool rg = a.requires_grad() || b.requires_grad();
  return t.push(std::move(out), rg, {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) linalg::gemm_nt_acc(g, tp.value(bi), tp.grad_mut(ai));
    if (tp.requires_grad(bi)) linalg::gemm_tn_acc(tp.value(ai), g, tp.grad_mut(bi));
  });
}

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("add", a.value(), b.value());
  Matrix out = a.value();
  linalg::axpy(1.0, b.value(), out);
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) linalg::axpy(1.0, g, tp.grad_mut(ai));
    if (tp.requires_grad(bi)) linalg::axpy(1.0, g, tp.grad_mut(bi));
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  Matrix out = a.value();
  linalg::axpy(-1.0, b.value(), out);
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) linalg::axpy(1.0, g, tp.grad_mut(ai));
    if (tp.requires_grad(bi)) linalg::axpy(-1.0, g, tp.grad_mut(bi));
  });
}

/// a[m×n] + bias[1×n], the bias broadcast over rows.
inline Var add_row(const Var& a, const Var& bias) {
  Tape& t = detail::same_tape(a, bias);
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows != 1 || bv.cols != av.cols) throw DimensionError("add_row: " + av.shape_str() + " + " + bv.shape_str());
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += bv.data[c];
  }
  const std::size_t ai = a.id(), bi = bias.id();
  return t.push(std::move(out), a.requires_grad() || bias.requires_grad(), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) linalg::axpy(1.0, g, tp.grad_mut(ai));
    if (tp.requires_grad(bi)) {
      Matrix& gb = tp.grad_mut(bi);
      for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += g(r, c);
      }
    }
  });
}

inline Var hadamard(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("hadamard", a.value(), b.value());
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ai)) {
      Matrix& ga = tp.grad_mut(ai);
      const Matrix& bval = tp.value(bi);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * bval.data[i];
    }
    if (tp.requires_grad(bi)) {
      Matrix& gb = tp.grad_mut(bi);
      const Matrix& aval = tp.value(ai);
      for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * aval.data[i];
    }
  });
}

/// alpha·x + beta, pointwise.
inline Var affine(const Var& x, double alpha, double beta = 0.0) {
  return detail::pointwise(
      x, [alpha, beta](double v) { return alpha * v + beta; }, [alpha](double, double) { return alpha; });
}

inline Var scale(const Var& x, double alpha) { return affine(x, alpha, 0.0); }

inline Var one_minus(const Var& x) { return affine(x, -1.0, 1.0); }

inline Var tanh(const Var& x) {
  return detail::pointwise(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(const Var& x) {
  return detail::pointwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline double logistic_value(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Var logistic(const Var& x) {
  return detail::pointwise(
      x, [](double v) { return logistic_value(v); }, [](double, double y) { return y * (1.0 - y); });
}

enum class Axis { Rows, Cols };

/// Contiguous concatenation; Axis::Cols joins side by side.
inline Var concat(std::span<const Var> parts, Axis axis) {
  if (parts.empty()) throw InputError("concat: empty part list");
  Tape& t = parts.front().tape();
  const Matrix& first = parts.front().value();
  std::size_t rows = 0, cols = 0;
  bool rg = false;
  std::vector<std::size_t> ids;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Var& v = parts[p];
    if (&v.tape() != &t) throw InputError("concat: parts live on different tapes");
    const Matrix& m = v.value();
    if (axis == Axis::Cols) {
      if (m.rows != first.rows) {
        throw DimensionError("concat(cols): part " + std::to_string(p) + " has " + m.shape_str() + ", expected " +
                             std::to_string(first.rows) + " rows");
      }
      cols += m.cols;
      rows = first.rows;
    } else {
      if (m.cols != first.cols) {
        throw DimensionError("concat(rows): part " + std::to_string(p) + " has " + m.shape_str() + ", expected " +
                             std::to_string(first.cols) + " cols");
      }
      rows += m.rows;
      cols = first.cols;
    }
    rg = rg || v.requires_grad();
    ids.push_back(v.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& v : parts) {
    const Matrix& m = v.value();
    if (axis == Axis::Cols) {
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
                  m.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols),
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
      }
      offset += m.cols;
    } else {
      std::copy(m.data.begin(), m.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset * cols));
      offset += m.rows;
    }
  }
  auto ids_copy = ids;
  return t.push(std::move(out), rg, std::move(ids), [ids = std::move(ids_copy), axis](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const Matrix& m = tp.value(id);
      if (tp.requires_grad(id)) {
        Matrix& gp = tp.grad_mut(id);
        if (axis == Axis::Cols) {
          for (std::size_t r = 0; r < m.rows; ++r) {
            for (std::size_t c = 0; c < m.cols; ++c) gp(r, c) += g(r, off + c);
          }
        } else {
          for (std::size_t i = 0; i < m.data.size(); ++i) gp.data[i] += g.data[off * g.cols + i];
        }
      }
      off += axis == Axis::Cols ? m.cols : m.rows;
    }
  });
}

inline Var concat(std::initializer_list<Var> parts, Axis axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

inline Var slice_cols(const Var& x, std::size_t begin, std::size_t count) {
  const Matrix& xv = x.value();
  if (begin + count > xv.cols) throw DimensionError("slice_cols: range exceeds " + xv.shape_str());
  Matrix out(xv.rows, count);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, begin + c);
  }
  const std::size_t xi = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), {xi}, [xi, begin](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) gx(r, begin + c) += g(r, c);
    }
  });
}

inline Var transpose(const Var& x) {
  const Matrix& xv = x.value();
  Matrix out(xv.cols, xv.rows);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = 0; c < xv.cols; ++c) out(c, r) = xv(r, c);
  }
  const std::size_t xi = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), {xi}, [xi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) gx(c, r) += g(r, c);
    }
  });
}

/// out[r] = x[index[r]].
inline Var gather_rows(const Var& x, std::vector<std::size_t> index) {
  const Matrix& xv = x.value();
  Matrix out(index.size(), xv.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= xv.rows) throw DimensionError("gather_rows: index " + std::to_string(index[r]) + " out of " + xv.shape_str());
    std::copy(xv.row(index[r]).begin(), xv.row(index[r]).end(), out.row(r).begin());
  }
  const std::size_t xi = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), {xi}, [xi, index = std::move(index)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < index.size(); ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) gx(index[r], c) += g(r, c);
    }
  });
}

/// out[index[r]] += x[r] over out_rows zero-initialised rows (segment sum).
inline Var scatter_add_rows(const Var& x, std::vector<std::size_t> index, std::size_t out_rows) {
  const Matrix& xv = x.value();
  if (index.size() != xv.rows) throw DimensionError("scatter_add_rows: index length differs from " + xv.shape_str());
  Matrix out(out_rows, xv.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= out_rows) throw DimensionError("scatter_add_rows: target row out of range");
    for (std::size_t c = 0; c < xv.cols; ++c) out(index[r], c) += xv(r, c);
  }
  const std::size_t xi = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), {xi}, [xi, index = std::move(index)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < index.size(); ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) gx(r, c) += g(index[r], c);
    }
  });
}

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const std::size_t xi = x.id();
  return x.tape().push(Matrix(1, 1, s), x.requires_grad(), {xi}, [xi](Tape& tp, std::size_t self) {
    const double g = tp.grad(self).data[0];
    for (double& v : tp.grad_mut(xi).data) v += g;
  });
}

/// Numerically stable softmax of every row.
inline Matrix softmax_rows_value(const Matrix& x) {
  if (x.cols == 0) throw InputError("softmax: empty row");
  if (!x.all_finite()) throw NumericError("softmax: non-finite input");
  Matrix y(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - m);
      z += out[c];
    }
    for (double& v : out) v /= z;
  }
  return y;
}

inline Var softmax_rows(const Var& x) {
  Matrix y = softmax_rows_value(x.value());
  const std::size_t xi = x.id();
  return x.tape().push(std::move(y), x.requires_grad(), {xi}, [xi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& yv = tp.value(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t r = 0; r < g.rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols; ++c) dot += g(r, c) * yv(r, c);
      for (std::size_t c = 0; c < g.cols; ++c) gx(r, c) += yv(r, c) * (g(r, c) - dot);
    }
  });
}

/// log Σ exp(x) for one row, exact for dominated tails (log1p of the remainder).
inline double log_sum_exp(std::span<const double> x) {
  const auto max_it = std::max_element(x.begin(), x.end());
  const double m = *max_it;
  double rest = 0.0;
  for (auto it = x.begin(); it != x.end(); ++it) {
    if (it != max_it) rest += std::exp(*it - m);
  }
  return m + std::log1p(rest);
}

/// −log softmax(logits)[label] for a 1×n row of logits.
inline Var cross_entropy(const Var& logits, std::size_t label) {
  const Matrix& lv = logits.value();
  if (lv.rows != 1 || lv.cols == 0) throw DimensionError("cross_entropy: logits must be 1xn, got " + lv.shape_str());
  if (label >= lv.cols) {
    throw InputError("cross_entropy: label " + std::to_string(label) + " out of range for " + std::to_string(lv.cols) +
                     " classes");
  }
  if (!lv.all_finite()) throw NumericError("cross_entropy: non-finite logits");
  // (m - x_label) + log1p(sum exp(x_j - m)) keeps full precision when the label is the max.
  const auto row = lv.row(0);
  const auto max_it = std::max_element(row.begin(), row.end());
  double rest = 0.0;
  for (auto it = row.begin(); it != row.end(); ++it) {
    if (it != max_it) rest += std::exp(*it - *max_it);
  }
  const double loss = (*max_it - lv.data[label]) + std::log1p(rest);
  const std::size_t li = logits.id();
  return logits.tape().push(Matrix(1, 1, loss), logits.requires_grad(), {li}, [li, label](Tape& tp, std::size_t self) {
    const double g = tp.grad(self).data[0];
    Matrix p = softmax_rows_value(tp.value(li));
    p.data[label] -= 1.0;
    linalg::axpy(g, p, tp.grad_mut(li));
  });
}

}  // namespace dmgnn::ad
