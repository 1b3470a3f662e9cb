#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dkmc/errors.hpp"

// Reverse-mode tape over dense matrices. Primitives cover exactly what the
// ELBO and log-marginal objectives need: elementwise arithmetic, matmul,
// reductions, column min/max, ReLU/softplus, and Cholesky-backed solve and
// log-det (no explicit inverse is ever formed). Templated on the scalar so
// production training can run in float while gradient checks run in double.

namespace dkmc::ad {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
class Tape;

template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr; }
  const Mat<S>& value() const { return tape->value(id); }
  int rows() const { return int(value().rows()); }
  int cols() const { return int(value().cols()); }
  S scalar() const { return value()(0, 0); }
};

template <class S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> leaf(Mat<S> v, bool requires_grad = true) {
    return push(std::move(v), requires_grad, nullptr);
  }
  Var<S> constant(Mat<S> v) { return push(std::move(v), false, nullptr); }
  Var<S> constant_scalar(S v) { return constant(Mat<S>::Constant(1, 1, v)); }

  const Mat<S>& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }

  /// Gradient of the last backward() output w.r.t. v (zeros if v never
  /// influenced the output).
  Mat<S> grad_of(Var<S> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad_live) return n.grad;
    return Mat<S>::Zero(n.value.rows(), n.value.cols());
  }

  void backward(Var<S> output) {
    if (output.value().rows() != 1 || output.value().cols() != 1)
      throw ShapeMismatchError("backward requires a scalar output node");
    for (Node& n : nodes_) {
      n.grad_live = false;
      n.grad.resize(0, 0);
    }
    Node& out = nodes_[output.id];
    out.grad = Mat<S>::Constant(1, 1, S(1));
    out.grad_live = true;
    for (int i = output.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad_live && n.requires_grad && n.backprop) n.backprop(*this);
    }
  }

  template <class Expr>
  void accum(int id, const Expr& e) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.grad_live) {
      n.grad = e;
      n.grad_live = true;
    } else {
      n.grad += e;
    }
  }

  const Mat<S>& grad(int id) const { return nodes_[id].grad; }
  int size() const { return int(nodes_.size()); }

  Var<S> push(Mat<S> v, bool requires_grad, std::function<void(Tape&)> backprop) {
    nodes_.push_back(Node{std::move(v), {}, std::move(backprop), requires_grad, false});
    return Var<S>{this, int(nodes_.size()) - 1};
  }
  void set_backprop(int id, std::function<void(Tape&)> fn) { nodes_[id].backprop = std::move(fn); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    std::function<void(Tape&)> backprop;
    bool requires_grad = false;
    bool grad_live = false;
  };
  std::vector<Node> nodes_;
};

namespace detail {

template <class S>
void check_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatchError(std::string(op) + ": operand shapes differ");
}

template <class S, class F>
Var<S> unary(Var<S> a, Mat<S> v, F&& fn) {
  Tape<S>& t = *a.tape;
  Var<S> out = t.push(std::move(v), t.needs_grad(a.id), nullptr);
  if (t.needs_grad(out.id)) {
    t.set_backprop(out.id, [fn = std::forward<F>(fn), ia = a.id, io = out.id](Tape<S>& t) {
      fn(t, ia, io);
    });
  }
  return out;
}

template <class S, class F>
Var<S> binary(Var<S> a, Var<S> b, Mat<S> v, F&& fn) {
  Tape<S>& t = *a.tape;
  Var<S> out = t.push(std::move(v), t.needs_grad(a.id) || t.needs_grad(b.id), nullptr);
  if (t.needs_grad(out.id)) {
    t.set_backprop(out.id,
                   [fn = std::forward<F>(fn), ia = a.id, ib = b.id, io = out.id](Tape<S>& t) {
                     fn(t, ia, ib, io);
                   });
  }
  return out;
}

}  // namespace detail

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "add");
  return detail::binary(a, b, Mat<S>(a.value() + b.value()), [](Tape<S>& t, int ia, int ib, int io) {
    t.accum(ia, t.grad(io));
    t.accum(ib, t.grad(io));
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "sub");
  return detail::binary(a, b, Mat<S>(a.value() - b.value()), [](Tape<S>& t, int ia, int ib, int io) {
    t.accum(ia, t.grad(io));
    t.accum(ib, -t.grad(io));
  });
}

template <class S>
Var<S> neg(Var<S> a) {
  return detail::unary(a, Mat<S>(-a.value()), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, -t.grad(io));
  });
}

/// Elementwise product.
template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "mul");
  return detail::binary(a, b, Mat<S>(a.value().cwiseProduct(b.value())),
                        [](Tape<S>& t, int ia, int ib, int io) {
                          t.accum(ia, t.grad(io).cwiseProduct(t.value(ib)));
                          t.accum(ib, t.grad(io).cwiseProduct(t.value(ia)));
                        });
}

/// Elementwise quotient.
template <class S>
Var<S> div(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "div");
  return detail::binary(a, b, Mat<S>(a.value().cwiseQuotient(b.value())),
                        [](Tape<S>& t, int ia, int ib, int io) {
                          const Mat<S>& g = t.grad(io);
                          t.accum(ia, g.cwiseQuotient(t.value(ib)));
                          t.accum(ib, -g.cwiseProduct(t.value(io)).cwiseQuotient(t.value(ib)));
                        });
}

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  if (a.cols() != b.rows()) throw ShapeMismatchError("matmul: inner dimensions differ");
  Mat<S> v = a.value() * b.value();
  return detail::binary(a, b, std::move(v), [](Tape<S>& t, int ia, int ib, int io) {
    const Mat<S>& g = t.grad(io);
    if (t.needs_grad(ia)) t.accum(ia, Mat<S>(g * t.value(ib).transpose()));
    if (t.needs_grad(ib)) t.accum(ib, Mat<S>(t.value(ia).transpose() * g));
  });
}

template <class S>
Var<S> transpose(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().transpose()), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, t.grad(io).transpose());
  });
}

template <class S>
Var<S> exp_(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().array().exp()), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, t.grad(io).cwiseProduct(t.value(io)));
  });
}

template <class S>
Var<S> log_(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().array().log()), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, t.grad(io).cwiseQuotient(t.value(ia)));
  });
}

/// max(x, 0); the subgradient at exactly 0 is taken as 0.
template <class S>
Var<S> relu(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().cwiseMax(S(0))), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, (t.value(ia).array() > S(0)).template cast<S>().matrix().cwiseProduct(t.grad(io)));
  });
}

/// log(1 + e^x), the positivity transform for kernel and noise parameters.
template <class S>
Var<S> softplus(Var<S> a) {
  Mat<S> v = a.value().unaryExpr([](S x) {
    return x > S(30) ? x : S(std::log1p(std::exp(double(x))));
  });
  return detail::unary(a, std::move(v), [](Tape<S>& t, int ia, int io) {
    Mat<S> sig = t.value(ia).unaryExpr([](S x) { return S(1) / (S(1) + S(std::exp(-double(x)))); });
    t.accum(ia, t.grad(io).cwiseProduct(sig));
  });
}

template <class S>
Var<S> sum(Var<S> a) {
  return detail::unary(a, Mat<S>(Mat<S>::Constant(1, 1, a.value().sum())),
                       [](Tape<S>& t, int ia, int io) {
    const S g = t.grad(io)(0, 0);
    t.accum(ia, Mat<S>::Constant(t.value(ia).rows(), t.value(ia).cols(), g));
  });
}

template <class S>
Var<S> trace(Var<S> a) {
  return detail::unary(a, Mat<S>(Mat<S>::Constant(1, 1, a.value().trace())),
                       [](Tape<S>& t, int ia, int io) {
    Mat<S> g = Mat<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.diagonal().array() = t.grad(io)(0, 0);
    t.accum(ia, g);
  });
}

/// N x d -> N x 1 row sums.
template <class S>
Var<S> row_sum(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().rowwise().sum()), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, Mat<S>(t.grad(io) * Mat<S>::Ones(1, t.value(ia).cols())));
  });
}

/// N x d -> 1 x d column sums.
template <class S>
Var<S> col_sum(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().colwise().sum()), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, Mat<S>(Mat<S>::Ones(t.value(ia).rows(), 1) * t.grad(io)));
  });
}

namespace detail {
template <class S, bool kMax>
Var<S> col_extreme(Var<S> a) {
  const Mat<S>& v = a.value();
  const int n = int(v.rows()), d = int(v.cols());
  Mat<S> out(1, d);
  auto rows = std::make_shared<std::vector<int>>(d);
  for (int c = 0; c < d; ++c) {
    int r = 0;
    if constexpr (kMax)
      out(0, c) = v.col(c).maxCoeff(&r);
    else
      out(0, c) = v.col(c).minCoeff(&r);
    (*rows)[c] = r;
  }
  (void)n;
  return unary(a, std::move(out), [rows](Tape<S>& t, int ia, int io) {
    Mat<S> g = Mat<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    for (int c = 0; c < int(rows->size()); ++c) g((*rows)[c], c) = t.grad(io)(0, c);
    t.accum(ia, g);
  });
}
}  // namespace detail

/// Column minima (gradient routed to the first attaining row).
template <class S>
Var<S> col_min(Var<S> a) {
  return detail::col_extreme<S, false>(a);
}

template <class S>
Var<S> col_max(Var<S> a) {
  return detail::col_extreme<S, true>(a);
}

/// 1 x d -> n x d (stacked copies).
template <class S>
Var<S> rep_rows(Var<S> a, int n) {
  if (a.rows() != 1) throw ShapeMismatchError("rep_rows expects a row vector");
  return detail::unary(a, Mat<S>(a.value().replicate(n, 1)), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, Mat<S>(t.grad(io).colwise().sum()));
  });
}

/// n x 1 -> n x m.
template <class S>
Var<S> rep_cols(Var<S> a, int m) {
  if (a.cols() != 1) throw ShapeMismatchError("rep_cols expects a column vector");
  return detail::unary(a, Mat<S>(a.value().replicate(1, m)), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, Mat<S>(t.grad(io).rowwise().sum()));
  });
}

template <class S>
Var<S> scale(Var<S> a, S c) {
  return detail::unary(a, Mat<S>(a.value() * c), [c](Tape<S>& t, int ia, int io) {
    t.accum(ia, Mat<S>(t.grad(io) * c));
  });
}

template <class S>
Var<S> add_const(Var<S> a, S c) {
  return detail::unary(a, Mat<S>(a.value().array() + c), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, t.grad(io));
  });
}

/// A + c*I.
template <class S>
Var<S> add_diag(Var<S> a, S c) {
  Mat<S> v = a.value();
  v.diagonal().array() += c;
  return detail::unary(a, std::move(v), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, t.grad(io));
  });
}

/// Matrix times a 1x1 node, broadcast.
template <class S>
Var<S> bscale(Var<S> a, Var<S> s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeMismatchError("bscale: scale must be 1x1");
  return detail::binary(a, s, Mat<S>(a.value() * s.scalar()),
                        [](Tape<S>& t, int ia, int is, int io) {
                          const Mat<S>& g = t.grad(io);
                          if (t.needs_grad(ia)) t.accum(ia, Mat<S>(g * t.value(is)(0, 0)));
                          if (t.needs_grad(is))
                            t.accum(is, Mat<S>::Constant(1, 1, g.cwiseProduct(t.value(ia)).sum()));
                        });
}

/// A + row vector broadcast over rows (the MLP bias add).
template <class S>
Var<S> add_rowvec(Var<S> a, Var<S> v) {
  if (v.rows() != 1 || v.cols() != a.cols()) throw ShapeMismatchError("add_rowvec: bad vector shape");
  Mat<S> out = a.value();
  out.rowwise() += v.value().row(0);
  return detail::binary(a, v, std::move(out), [](Tape<S>& t, int ia, int iv, int io) {
    const Mat<S>& g = t.grad(io);
    t.accum(ia, g);
    t.accum(iv, Mat<S>(g.colwise().sum()));
  });
}

template <class S>
Var<S> sub_rowvec(Var<S> a, Var<S> v) {
  if (v.rows() != 1 || v.cols() != a.cols()) throw ShapeMismatchError("sub_rowvec: bad vector shape");
  Mat<S> out = a.value();
  out.rowwise() -= v.value().row(0);
  return detail::binary(a, v, std::move(out), [](Tape<S>& t, int ia, int iv, int io) {
    const Mat<S>& g = t.grad(io);
    t.accum(ia, g);
    t.accum(iv, Mat<S>(-g.colwise().sum()));
  });
}

/// A with each column divided by the matching entry of a row vector.
template <class S>
Var<S> div_rowvec(Var<S> a, Var<S> v) {
  if (v.rows() != 1 || v.cols() != a.cols()) throw ShapeMismatchError("div_rowvec: bad vector shape");
  Mat<S> out = a.value().array().rowwise() / v.value().row(0).array();
  return detail::binary(a, v, std::move(out), [](Tape<S>& t, int ia, int iv, int io) {
    const Mat<S>& g = t.grad(io);
    const auto vrow = t.value(iv).row(0).array();
    if (t.needs_grad(ia)) t.accum(ia, Mat<S>(g.array().rowwise() / vrow));
    if (t.needs_grad(iv)) {
      Mat<S> gv = -(g.cwiseProduct(t.value(io))).colwise().sum();
      gv.array() /= vrow;
      t.accum(iv, gv);
    }
  });
}

/// Strictly lower-triangular part (diagonal and above zeroed).
template <class S>
Var<S> tril_strict(Var<S> a) {
  Mat<S> v = a.value().template triangularView<Eigen::StrictlyLower>();
  return detail::unary(a, std::move(v), [](Tape<S>& t, int ia, int io) {
    Mat<S> g = t.grad(io).template triangularView<Eigen::StrictlyLower>();
    t.accum(ia, g);
  });
}

/// n x n -> n x 1 diagonal extraction.
template <class S>
Var<S> diag_vec(Var<S> a) {
  return detail::unary(a, Mat<S>(a.value().diagonal()), [](Tape<S>& t, int ia, int io) {
    Mat<S> g = Mat<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.diagonal() = t.grad(io).col(0);
    t.accum(ia, g);
  });
}

/// n x 1 -> n x n diagonal matrix.
template <class S>
Var<S> diag_embed(Var<S> a) {
  if (a.cols() != 1) throw ShapeMismatchError("diag_embed expects a column vector");
  Mat<S> v = Mat<S>::Zero(a.rows(), a.rows());
  v.diagonal() = a.value().col(0);
  return detail::unary(a, std::move(v), [](Tape<S>& t, int ia, int io) {
    t.accum(ia, Mat<S>(t.grad(io).diagonal()));
  });
}

/// X = A^{-1} B for symmetric positive-definite A, via Cholesky.
/// d/dA = -(A^{-1} dX) X^T, d/dB = A^{-1} dX; the factor is kept for backward.
template <class S>
Var<S> chol_solve(Var<S> a, Var<S> b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw ShapeMismatchError("chol_solve: shape mismatch");
  auto llt = std::make_shared<Eigen::LLT<Mat<S>>>(a.value());
  if (llt->info() != Eigen::Success)
    throw NotPsdError("chol_solve: matrix not positive definite");
  Mat<S> v = llt->solve(b.value());
  return detail::binary(a, b, std::move(v), [llt](Tape<S>& t, int ia, int ib, int io) {
    Mat<S> gb = llt->solve(t.grad(io));
    if (t.needs_grad(ia)) t.accum(ia, Mat<S>(-gb * t.value(io).transpose()));
    if (t.needs_grad(ib)) t.accum(ib, gb);
  });
}

/// log det A for symmetric positive-definite A. d/dA = g * A^{-1}.
template <class S>
Var<S> logdet_spd(Var<S> a) {
  if (a.rows() != a.cols()) throw ShapeMismatchError("logdet_spd: matrix must be square");
  auto llt = std::make_shared<Eigen::LLT<Mat<S>>>(a.value());
  if (llt->info() != Eigen::Success)
    throw NotPsdError("logdet_spd: matrix not positive definite");
  S ld = S(2) * Mat<S>(llt->matrixL()).diagonal().array().log().sum();
  return detail::unary(a, Mat<S>(Mat<S>::Constant(1, 1, ld)), [llt](Tape<S>& t, int ia, int io) {
    const int n = int(t.value(ia).rows());
    Mat<S> inv = llt->solve(Mat<S>::Identity(n, n));
    t.accum(ia, Mat<S>(t.grad(io)(0, 0) * inv));
  });
}

template <class S>
Var<S> operator+(Var<S> a, Var<S> b) {
  return add(a, b);
}
template <class S>
Var<S> operator-(Var<S> a, Var<S> b) {
  return sub(a, b);
}
template <class S>
Var<S> operator-(Var<S> a) {
  return neg(a);
}
template <class S>
Var<S> operator*(Var<S> a, Var<S> b) {
  return mul(a, b);
}
template <class S>
Var<S> operator/(Var<S> a, Var<S> b) {
  return div(a, b);
}

}  // namespace dkmc::ad
