// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The LRT Authors
 *
 * @file   tensor.hpp
 * @brief  Dense reverse-mode automatic differentiation on Eigen matrices.
 *
 * A Tape records every operation of one forward pass in creation order,
 * which is already a topological order, so backward() is a single reverse
 * sweep. Values are rank-2 row-major matrices; vectors are 1 x k rows.
 * Ops never mutate their inputs.
 */

#ifndef LRT_TENSOR_HPP_
#define LRT_TENSOR_HPP_

#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace lrt::ad {

template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Scalar> class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <typename Scalar> class Var {
public:
  using Mat = Matrix<Scalar>;

  Var() = default;
  Var(Tape<Scalar> *tape, int id) : tape_(tape), id_(id) {}

  const Mat &value() const { return tape_->value(*this); }
  /// Empty until backward reaches this node.
  const Mat &grad() const { return tape_->grad(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
  bool requires_grad() const { return tape_->requires_grad(*this); }

  Tape<Scalar> *tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

private:
  Tape<Scalar> *tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar> class Tape {
public:
  using Mat = Matrix<Scalar>;
  using V = Var<Scalar>;
  /// Receives the node's output value and its accumulated gradient.
  using Backward = std::function<void(Tape &, const Mat &, const Mat &)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  V constant(Mat value) { return push(std::move(value), false, {}); }
  V variable(Mat value) { return push(std::move(value), true, {}); }

  /// Records an op result. The node needs a gradient when any parent does;
  /// otherwise `fn` is dropped.
  V record(Mat value, std::initializer_list<V> parents, Backward fn) {
    return record(std::move(value), std::span<const V>(parents.begin(), parents.size()),
                  std::move(fn));
  }

  V record(Mat value, std::span<const V> parents, Backward fn) {
    bool needs = false;
    for (const auto &p : parents) {
      check_owner(p);
      needs = needs || nodes_[static_cast<std::size_t>(p.id())].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : Backward{});
  }

  const Mat &value(const V &v) const { return node(v).value; }
  const Mat &grad(const V &v) const { return node(v).grad; }
  bool requires_grad(const V &v) const { return node(v).requires_grad; }

  template <typename Derived>
  void accumulate(const V &v, const Eigen::MatrixBase<Derived> &g) {
    auto &n = node(v);
    if (!n.requires_grad)
      return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Reverse sweep from a 1x1 root. Leaf gradients accumulate across calls
  /// until reset_grads(); interior gradients are rebuilt on every sweep.
  void backward(const V &root) {
    check_owner(root);
    const auto &r = node(root);
    if (r.value.rows() != 1 || r.value.cols() != 1)
      throw ShapeError("backward needs a scalar root, got " +
                       shape_str(r.value.rows(), r.value.cols()));
    for (auto &n : nodes_)
      if (n.backward)
        n.grad.resize(0, 0);
    accumulate(root, Mat::Ones(1, 1));
    for (int i = root.id(); i >= 0; --i) {
      auto &n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && n.grad.size() != 0)
        n.backward(*this, n.value, n.grad);
    }
  }

  void reset_grads() {
    for (auto &n : nodes_)
      n.grad.resize(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

  void check_owner(const V &v) const {
    if (v.tape() != this || v.id() < 0 ||
        static_cast<std::size_t>(v.id()) >= nodes_.size())
      throw std::invalid_argument("variable does not belong to this tape");
  }

private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };

  V push(Mat value, bool requires_grad, Backward fn) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(fn)});
    return V(this, static_cast<int>(nodes_.size() - 1));
  }

  Node &node(const V &v) { return nodes_[static_cast<std::size_t>(v.id())]; }
  const Node &node(const V &v) const {
    return nodes_[static_cast<std::size_t>(v.id())];
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <typename Scalar>
Tape<Scalar> &same_tape(const Var<Scalar> &a, const Var<Scalar> &b) {
  if (a.tape() != b.tape())
    throw std::invalid_argument("operands live on different tapes");
  return *a.tape();
}

template <typename Scalar>
void require_same_shape(const char *op, const Var<Scalar> &a, const Var<Scalar> &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
}

template <typename Scalar> Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0))
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// tanh-approximation GELU constants
template <typename Scalar> constexpr Scalar kGeluC = Scalar(0.7978845608028654); // sqrt(2/pi)
template <typename Scalar> constexpr Scalar kGeluA = Scalar(0.044715);

} // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// [m x k] * [k x p]
template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar> &a, const Var<Scalar> &b) {
  auto &t = detail::same_tape(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ, " +
                     shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  Matrix<Scalar> out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return t.record(std::move(out), {a, b},
                  [a, b](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    if (a.requires_grad()) {
                      Matrix<Scalar> ga(a.rows(), a.cols());
                      ga.noalias() = g * b.value().transpose();
                      tp.accumulate(a, ga);
                    }
                    if (b.requires_grad()) {
                      Matrix<Scalar> gb(b.rows(), b.cols());
                      gb.noalias() = a.value().transpose() * g;
                      tp.accumulate(b, gb);
                    }
                  });
}

template <typename Scalar> Var<Scalar> transpose(const Var<Scalar> &a) {
  Matrix<Scalar> out = a.value().transpose();
  return a.tape()->record(std::move(out), {a},
                          [a](Tape<Scalar> &tp, const Matrix<Scalar> &,
                              const Matrix<Scalar> &g) { tp.accumulate(a, g.transpose()); });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar> &a, const Var<Scalar> &b) {
  auto &t = detail::same_tape(a, b);
  detail::require_same_shape("add", a, b);
  return t.record(a.value() + b.value(), {a, b},
                  [a, b](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, g);
                  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar> &a, const Var<Scalar> &b) {
  auto &t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  return t.record(a.value() - b.value(), {a, b},
                  [a, b](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    tp.accumulate(a, g);
                    tp.accumulate(b, -g);
                  });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar> &a, const Var<Scalar> &b) {
  auto &t = detail::same_tape(a, b);
  detail::require_same_shape("hadamard", a, b);
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [a, b](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    if (a.requires_grad())
                      tp.accumulate(a, g.cwiseProduct(b.value()));
                    if (b.requires_grad())
                      tp.accumulate(b, g.cwiseProduct(a.value()));
                  });
}

/// alpha * a + beta, elementwise.
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar> &a, Scalar alpha, Scalar beta) {
  Matrix<Scalar> out = (alpha * a.value().array() + beta).matrix();
  return a.tape()->record(std::move(out), {a},
                          [a, alpha](Tape<Scalar> &tp, const Matrix<Scalar> &,
                                     const Matrix<Scalar> &g) { tp.accumulate(a, alpha * g); });
}

template <typename Scalar> Var<Scalar> operator*(const Var<Scalar> &a, Scalar s) {
  return affine(a, s, Scalar(0));
}
template <typename Scalar> Var<Scalar> operator*(Scalar s, const Var<Scalar> &a) {
  return affine(a, s, Scalar(0));
}

/// s * a where s is a 1x1 node.
template <typename Scalar>
Var<Scalar> scalar_mul(const Var<Scalar> &s, const Var<Scalar> &a) {
  auto &t = detail::same_tape(s, a);
  if (s.rows() != 1 || s.cols() != 1)
    throw ShapeError("scalar_mul: first operand must be 1x1, got " +
                     shape_str(s.rows(), s.cols()));
  return t.record(s.scalar() * a.value(), {s, a},
                  [s, a](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    if (s.requires_grad())
                      tp.accumulate(s, Matrix<Scalar>::Constant(
                                           1, 1, g.cwiseProduct(a.value()).sum()));
                    if (a.requires_grad())
                      tp.accumulate(a, s.scalar() * g);
                  });
}

/// Adds a 1 x c row to every row of a [m x c].
template <typename Scalar>
Var<Scalar> add_rowwise(const Var<Scalar> &a, const Var<Scalar> &row) {
  auto &t = detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_rowwise: row " + shape_str(row.rows(), row.cols()) +
                     " does not fit " + shape_str(a.rows(), a.cols()));
  Matrix<Scalar> out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), {a, row},
                  [a, row](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    tp.accumulate(a, g);
                    if (row.requires_grad())
                      tp.accumulate(row, g.colwise().sum());
                  });
}

/// Scales every row of a [m x c] elementwise by a 1 x c row.
template <typename Scalar>
Var<Scalar> mul_rowwise(const Var<Scalar> &a, const Var<Scalar> &row) {
  auto &t = detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("mul_rowwise: row " + shape_str(row.rows(), row.cols()) +
                     " does not fit " + shape_str(a.rows(), a.cols()));
  Matrix<Scalar> out = a.value().array().rowwise() * row.value().row(0).array();
  return t.record(std::move(out), {a, row},
                  [a, row](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                    if (a.requires_grad())
                      tp.accumulate(a, (g.array().rowwise() * row.value().row(0).array()).matrix());
                    if (row.requires_grad())
                      tp.accumulate(row, g.cwiseProduct(a.value()).colwise().sum());
                  });
}

template <typename Scalar> Var<Scalar> square(const Var<Scalar> &a) {
  return a.tape()->record(a.value().array().square().matrix(), {a},
                          [a](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                            tp.accumulate(a, Scalar(2) * g.cwiseProduct(a.value()));
                          });
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename Scalar> Var<Scalar> gelu(const Var<Scalar> &a) {
  using detail::kGeluA;
  using detail::kGeluC;
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::tanh(kGeluC<Scalar> * (x + kGeluA<Scalar> * x * x * x)));
  });
  return a.tape()->record(
      std::move(out), {a},
      [a](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
        Matrix<Scalar> d = a.value().unaryExpr([](Scalar x) {
          const Scalar th = std::tanh(kGeluC<Scalar> * (x + kGeluA<Scalar> * x * x * x));
          return Scalar(0.5) * (Scalar(1) + th) +
                 Scalar(0.5) * x * (Scalar(1) - th * th) * kGeluC<Scalar> *
                     (Scalar(1) + Scalar(3) * kGeluA<Scalar> * x * x);
        });
        tp.accumulate(a, g.cwiseProduct(d));
      });
}

/// 1 / (1 + e^-x), evaluated without overflow for large |x|.
template <typename Scalar> Var<Scalar> sigmoid(const Var<Scalar> &a) {
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) { return detail::stable_sigmoid(x); });
  return a.tape()->record(std::move(out), {a},
                          [a](Tape<Scalar> &tp, const Matrix<Scalar> &y, const Matrix<Scalar> &g) {
                            tp.accumulate(a, (g.array() * y.array() * (Scalar(1) - y.array())).matrix());
                          });
}

/// Softmax along `axis` (1: within each row, 0: within each column).
template <typename Scalar> Var<Scalar> softmax(const Var<Scalar> &a, int axis = 1) {
  if (axis != 0 && axis != 1)
    throw ShapeError("softmax: axis must be 0 or 1");
  const Matrix<Scalar> &x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  if (axis == 1) {
    for (Index i = 0; i < x.rows(); ++i) {
      out.row(i) = (x.row(i).array() - x.row(i).maxCoeff()).exp().matrix();
      out.row(i) /= out.row(i).sum();
    }
  } else {
    for (Index j = 0; j < x.cols(); ++j) {
      out.col(j) = (x.col(j).array() - x.col(j).maxCoeff()).exp().matrix();
      out.col(j) /= out.col(j).sum();
    }
  }
  return a.tape()->record(
      std::move(out), {a},
      [a, axis](Tape<Scalar> &tp, const Matrix<Scalar> &y, const Matrix<Scalar> &g) {
        Matrix<Scalar> gy = g.cwiseProduct(y);
        Matrix<Scalar> ga(y.rows(), y.cols());
        if (axis == 1) {
          auto dots = gy.rowwise().sum();
          ga = gy - (y.array().colwise() * dots.array()).matrix();
        } else {
          auto dots = gy.colwise().sum();
          ga = gy - (y.array().rowwise() * dots.array()).matrix();
        }
        tp.accumulate(a, ga);
      });
}

/// Normalizes each row to zero mean and unit variance, then applies
/// gain and bias (both 1 x cols).
template <typename Scalar>
Var<Scalar> layer_norm(const Var<Scalar> &x, const Var<Scalar> &gain,
                       const Var<Scalar> &bias, Scalar eps = Scalar(1e-5)) {
  auto &t = detail::same_tape(x, gain);
  detail::same_tape(x, bias);
  const Index m = x.rows(), c = x.cols();
  if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c)
    throw ShapeError("layer_norm: gain/bias must be " + shape_str(1, c));
  Matrix<Scalar> xhat(m, c);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(m);
  for (Index i = 0; i < m; ++i) {
    const Scalar mean = x.value().row(i).mean();
    auto centered = x.value().row(i).array() - mean;
    const Scalar var = centered.square().mean();
    inv_std(i) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (centered * inv_std(i)).matrix();
  }
  Matrix<Scalar> out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return t.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
        if (gain.requires_grad())
          tp.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (bias.requires_grad())
          tp.accumulate(bias, g.colwise().sum());
        if (!x.requires_grad())
          return;
        Matrix<Scalar> dxhat = g.array().rowwise() * gain.value().row(0).array();
        Matrix<Scalar> dx(dxhat.rows(), dxhat.cols());
        for (Index i = 0; i < dxhat.rows(); ++i) {
          const Scalar mean_d = dxhat.row(i).mean();
          const Scalar mean_dx = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
          dx.row(i) = inv_std(i) * (dxhat.row(i).array() - mean_d -
                                    xhat.row(i).array() * mean_dx).matrix();
        }
        tp.accumulate(x, dx);
      });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean over rows of -log softmax(logits)[row, target[row]].
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar> &logits, std::span<const int> targets) {
  const auto &z = logits.value();
  if (static_cast<Index>(targets.size()) != z.rows())
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(z.rows()) + " rows");
  for (int t : targets)
    if (t < 0 || t >= z.cols())
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) +
                              " outside [0, " + std::to_string(z.cols()) + ")");
  Matrix<Scalar> probs(z.rows(), z.cols());
  Scalar total = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    const Scalar mx = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - mx).exp().matrix();
    const Scalar sum = probs.row(i).sum();
    probs.row(i) /= sum;
    total += mx + std::log(sum) - z(i, targets[static_cast<std::size_t>(i)]);
  }
  const Scalar rows = static_cast<Scalar>(z.rows());
  std::vector<int> tgt(targets.begin(), targets.end());
  return logits.tape()->record(
      Matrix<Scalar>::Constant(1, 1, total / rows), {logits},
      [logits, probs = std::move(probs), tgt = std::move(tgt),
       rows](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
        Matrix<Scalar> d = probs;
        for (Index i = 0; i < d.rows(); ++i)
          d(i, tgt[static_cast<std::size_t>(i)]) -= Scalar(1);
        tp.accumulate(logits, (g(0, 0) / rows) * d);
      });
}

/// Binary cross-entropy of sigmoid(logit) against `target` in [0, 1],
/// computed from the logit: max(z,0) - z*y + log(1 + e^-|z|).
template <typename Scalar>
Var<Scalar> bce_with_logit(const Var<Scalar> &logit, Scalar target) {
  if (logit.rows() != 1 || logit.cols() != 1)
    throw ShapeError("bce_with_logit expects a 1x1 logit");
  const Scalar z = logit.scalar();
  const Scalar loss = std::max(z, Scalar(0)) - z * target + std::log1p(std::exp(-std::abs(z)));
  return logit.tape()->record(
      Matrix<Scalar>::Constant(1, 1, loss), {logit},
      [logit, target](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
        const Scalar s = detail::stable_sigmoid(logit.scalar());
        tp.accumulate(logit, Matrix<Scalar>::Constant(1, 1, g(0, 0) * (s - target)));
      });
}

// ---------------------------------------------------------------------------
// Reductions and structure
// ---------------------------------------------------------------------------

template <typename Scalar> Var<Scalar> sum(const Var<Scalar> &a) {
  return a.tape()->record(Matrix<Scalar>::Constant(1, 1, a.value().sum()), {a},
                          [a](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                            tp.accumulate(a, Matrix<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
                          });
}

template <typename Scalar> Var<Scalar> mean(const Var<Scalar> &a) {
  return sum(a) * (Scalar(1) / static_cast<Scalar>(a.value().size()));
}

/// Sum of 1x1 nodes.
template <typename Scalar> Var<Scalar> add_n(std::span<const Var<Scalar>> parts) {
  if (parts.empty())
    throw std::invalid_argument("add_n: no operands");
  Matrix<Scalar> out = parts[0].value();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    detail::require_same_shape("add_n", parts[0], parts[i]);
    out += parts[i].value();
  }
  std::vector<Var<Scalar>> ps(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), std::span<const Var<Scalar>>(ps),
                                 [ps](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                                   for (const auto &p : ps)
                                     tp.accumulate(p, g);
                                 });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_cols: no operands");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto &p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto &p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var<Scalar>> ps(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), std::span<const Var<Scalar>>(ps),
                                 [ps](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                                   Index off = 0;
                                   for (const auto &p : ps) {
                                     if (p.requires_grad())
                                       tp.accumulate(p, g.middleCols(off, p.cols()));
                                     off += p.cols();
                                   }
                                 });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_rows: no operands");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto &p : parts) {
    if (p.cols() != cols)
      throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto &p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var<Scalar>> ps(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), std::span<const Var<Scalar>>(ps),
                                 [ps](Tape<Scalar> &tp, const Matrix<Scalar> &, const Matrix<Scalar> &g) {
                                   Index off = 0;
                                   for (const auto &p : ps) {
                                     if (p.requires_grad())
                                       tp.accumulate(p, g.middleRows(off, p.rows()));
                                     off += p.rows();
                                   }
                                 });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts) {
  return concat_cols(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}
template <typename Scalar>
Var<Scalar> concat_rows(std::initializer_list<Var<Scalar>> parts) {
  return concat_rows(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar> &a, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > a.rows())
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", +" +
                     std::to_string(count) + ") outside " + shape_str(a.rows(), a.cols()));
  return a.tape()->record(a.value().middleRows(start, count), {a},
                          [a, start, count](Tape<Scalar> &tp, const Matrix<Scalar> &,
                                            const Matrix<Scalar> &g) {
                            Matrix<Scalar> full = Matrix<Scalar>::Zero(a.rows(), a.cols());
                            full.middleRows(start, count) = g;
                            tp.accumulate(a, full);
                          });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar> &a, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > a.cols())
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", +" +
                     std::to_string(count) + ") outside " + shape_str(a.rows(), a.cols()));
  return a.tape()->record(a.value().middleCols(start, count), {a},
                          [a, start, count](Tape<Scalar> &tp, const Matrix<Scalar> &,
                                            const Matrix<Scalar> &g) {
                            Matrix<Scalar> full = Matrix<Scalar>::Zero(a.rows(), a.cols());
                            full.middleCols(start, count) = g;
                            tp.accumulate(a, full);
                          });
}

/// Same value, no gradient path.
template <typename Scalar> Var<Scalar> detach(const Var<Scalar> &a) {
  return a.tape()->constant(a.value());
}

} // namespace lrt::ad

#endif // LRT_TENSOR_HPP_
