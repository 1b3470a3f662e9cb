#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "dkmc/errors.hpp"
#include "dkmc/tape.hpp"

namespace dkmc {

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-8;
};

/// Momentum SGD with decoupled-from-nothing classic semantics: the decay is
/// folded into the gradient, the velocity buffer is then applied.
///   g' = g + wd * p;  v = momentum * v + g';  p -= lr * v
template <class S>
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) {}

  void step(std::vector<ad::Mat<S>*> params, const std::vector<ad::Mat<S>>& grads) {
    if (params.size() != grads.size()) throw ShapeMismatchError("sgd_step: param/grad count differ");
    if (velocity_.empty()) {
      velocity_.reserve(params.size());
      for (auto* p : params) velocity_.push_back(ad::Mat<S>::Zero(p->rows(), p->cols()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      ad::Mat<S>& p = *params[i];
      const ad::Mat<S>& g = grads[i];
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw ShapeMismatchError("sgd_step: gradient shape differs from parameter");
      ad::Mat<S>& v = velocity_[i];
      if (cfg_.weight_decay != 0.0)
        v = S(cfg_.momentum) * v + (g + S(cfg_.weight_decay) * p);
      else
        v = S(cfg_.momentum) * v + g;
      p -= S(cfg_.lr) * v;
    }
  }

  const SgdConfig& config() const { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<ad::Mat<S>> velocity_;
};

/// Max over coordinates of |g_ad - g_fd| / max(1, |g_fd|), with g_fd from
/// central differences. `build` must construct the scalar objective on the
/// given tape from the supplied leaves; it is re-run at perturbed inputs,
/// so it has to be a pure function of them.
template <class S>
double finite_diff_check(
    const std::function<ad::Var<S>(ad::Tape<S>&, std::vector<ad::Var<S>>&)>& build,
    std::vector<ad::Mat<S>> x, double eps) {
  auto eval = [&](const std::vector<ad::Mat<S>>& pt) {
    ad::Tape<S> tape;
    std::vector<ad::Var<S>> leaves;
    leaves.reserve(pt.size());
    for (const auto& m : pt) leaves.push_back(tape.leaf(m));
    return double(build(tape, leaves).scalar());
  };

  ad::Tape<S> tape;
  std::vector<ad::Var<S>> leaves;
  for (const auto& m : x) leaves.push_back(tape.leaf(m));
  ad::Var<S> out = build(tape, leaves);
  tape.backward(out);
  std::vector<ad::Mat<S>> g_ad;
  g_ad.reserve(leaves.size());
  for (auto v : leaves) g_ad.push_back(tape.grad_of(v));

  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (int j = 0; j < x[k].size(); ++j) {
      std::vector<ad::Mat<S>> pt = x;
      pt[k].data()[j] += S(eps);
      const double up = eval(pt);
      pt[k].data()[j] -= S(2 * eps);
      const double dn = eval(pt);
      const double fd = (up - dn) / (2 * eps);
      const double ad_g = double(g_ad[k].data()[j]);
      const double err = std::abs(ad_g - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dkmc
