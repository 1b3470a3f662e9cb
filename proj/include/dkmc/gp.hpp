#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dkmc/errors.hpp"
#include "dkmc/tape.hpp"

namespace dkmc {

/// k(x, x') = s * exp(-||x - x'||^2 / gamma^2). The gamma^2 denominator
/// (no 1/2 factor) is deliberate; anyone comparing against other RBF
/// conventions must rescale gamma. The output scale s is optional and
/// defaults to off (s = 1).
struct RbfKernel {
  double gamma = 1.0;
  bool use_output_scale = false;
  double output_scale = 1.0;

  double scale_value() const { return use_output_scale ? output_scale : 1.0; }
};

double rbf(const RbfKernel& k, Eigen::Ref<const Eigen::VectorXd> x,
           Eigen::Ref<const Eigen::VectorXd> x2);

/// Raw Gram matrix (no jitter); entries k(X.row(i), X2.row(j)).
Eigen::MatrixXd kernel_matrix(const RbfKernel& k, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& X2);

/// First diagonal shift in {base, 10*base, ..., max} that makes A + eps*I
/// factorizable; a leading 0 is tried when try_plain is set. NotPsdError
/// when the ladder is exhausted.
double choose_spd_jitter(const Eigen::MatrixXd& A, double base, double max_jitter,
                         bool try_plain);

struct ExactGpModel {
  Eigen::MatrixXd X;  // N x d'
  Eigen::VectorXd y;  // N
  RbfKernel kernel;
  double sigma = 0.1;  // noise standard deviation
};

/// K(Xq,X) [K(X,X) + sigma^2 I]^{-1} y via Cholesky solve. Jitter is added
/// only if the sigma^2-regularized factorization fails (escalating to 1e-4).
Eigen::VectorXd gpr_posterior_mean(const ExactGpModel& model, const Eigen::MatrixXd& Xq);

/// -1/2 log det(K + sigma^2 I) - 1/2 y^T (K + sigma^2 I)^{-1} y - N/2 log 2pi
double gpr_log_marginal(const ExactGpModel& model);

struct SvgpState {
  Eigen::MatrixXd Z;         // M x d' inducing locations
  Eigen::VectorXd m;         // M variational mean
  Eigen::MatrixXd L_lambda;  // M x M lower factor, Lambda = L L^T
  RbfKernel kernel;
  double sigma = 0.1;
  double jitter = 1e-6;  // base jitter on K_ZZ, escalates x10 to 1e-4

  Eigen::MatrixXd lambda() const { return L_lambda * L_lambda.transpose(); }
};

/// Variational posterior mean and variance at one latent query.
std::pair<double, double> svgp_predict(const SvgpState& state,
                                       Eigen::Ref<const Eigen::VectorXd> xq);

/// Batched means/variances at query rows Gq.
void svgp_predict_batch(const SvgpState& state, const Eigen::MatrixXd& Gq,
                        Eigen::VectorXd& means, Eigen::VectorXd& vars);

/// 1/2 [ tr(K^{-1} Lambda) + m^T K^{-1} m - M + log det K - log det Lambda ]
double kl_gaussian(const Eigen::VectorXd& m, const Eigen::MatrixXd& lambda,
                   const Eigen::MatrixXd& kzz);

/// Full ELBO of the Gaussian-noise SVGP on latent inputs G: the closed-form
/// expected log-likelihood minus KL[q(u)||p(u)]. Evaluated through the same
/// graph the trainer differentiates.
double elbo(const SvgpState& state, const Eigen::MatrixXd& G, const Eigen::VectorXd& y);

// ---- tape graph builders ----------------------------------------------
//
// The same jittered K_ZZ node feeds the posterior solve, the predictive
// variance and the KL prior, which keeps the computed value an exact lower
// bound of the exact log marginal likelihood for any (Z, m, Lambda).

namespace graph {

template <class S>
struct KernelVars {
  ad::Var<S> neg_inv_g2;  // 1x1, -1/gamma^2
  ad::Var<S> oscale;      // 1x1; invalid when the output scale is disabled
};

template <class S>
KernelVars<S> kernel_vars(ad::Tape<S>& t, ad::Var<S> gamma, ad::Var<S> oscale) {
  ad::Var<S> g2 = ad::mul(gamma, gamma);
  ad::Var<S> one = t.constant_scalar(S(-1));
  return {ad::div(one, g2), oscale};
}

/// Pairwise squared distances ||a_i - b_j||^2 as an n x m node.
template <class S>
ad::Var<S> pairwise_sqdist(ad::Tape<S>& t, ad::Var<S> A, ad::Var<S> B) {
  (void)t;
  if (A.cols() != B.cols()) throw ShapeMismatchError("pairwise_sqdist: dim mismatch");
  const int n = A.rows(), m = B.rows();
  ad::Var<S> sqa = ad::row_sum(ad::mul(A, A));
  ad::Var<S> sqb = ad::row_sum(ad::mul(B, B));
  ad::Var<S> cross = ad::matmul(A, ad::transpose(B));
  return ad::sub(ad::add(ad::rep_cols(sqa, m), ad::transpose(ad::rep_cols(sqb, n))),
                 ad::scale(cross, S(2)));
}

template <class S>
ad::Var<S> kernel_gram(ad::Tape<S>& t, const KernelVars<S>& k, ad::Var<S> A, ad::Var<S> B) {
  ad::Var<S> e = ad::exp_(ad::bscale(pairwise_sqdist(t, A, B), k.neg_inv_g2));
  if (k.oscale.valid()) e = ad::bscale(e, k.oscale);
  return e;
}

template <class S>
struct SvgpCoreVars {
  ad::Var<S> Z;       // M x d'
  ad::Var<S> m;       // M x 1
  ad::Var<S> L;       // M x M lower-triangular, positive diagonal
  KernelVars<S> kernel;
  ad::Var<S> sigma2;  // 1x1 noise variance
};

/// ELBO node. `jitter` <= 0 means: pick the first working rung of the
/// state ladder from the current K_ZZ value.
template <class S>
ad::Var<S> svgp_elbo(ad::Tape<S>& t, const SvgpCoreVars<S>& v, ad::Var<S> G,
                     const ad::Mat<S>& y, double jitter_base, double jitter_max) {
  const int n_data = int(y.rows());
  const int m_ind = v.Z.rows();

  ad::Var<S> kzz_raw = kernel_gram(t, v.kernel, v.Z, v.Z);
  Eigen::MatrixXd kzz_val = kzz_raw.value().template cast<double>();
  const double eps = choose_spd_jitter(kzz_val, jitter_base, jitter_max, false);
  ad::Var<S> kzz = ad::add_diag(kzz_raw, S(eps));

  ad::Var<S> kgz = kernel_gram(t, v.kernel, G, v.Z);  // N x M
  ad::Var<S> alpha = ad::chol_solve(kzz, v.m);        // M x 1
  ad::Var<S> mu = ad::matmul(kgz, alpha);             // N x 1

  ad::Var<S> kzg = ad::transpose(kgz);
  ad::Var<S> B = ad::chol_solve(kzz, kzg);  // M x N
  // predictive variance: k_ii - b_i^T K b_i + || L^T b_i ||^2
  ad::Var<S> t1 = ad::transpose(ad::col_sum(ad::mul(kzg, B)));  // N x 1
  ad::Var<S> LtB = ad::matmul(ad::transpose(v.L), B);
  ad::Var<S> t2 = ad::transpose(ad::col_sum(ad::mul(LtB, LtB)));
  ad::Var<S> kdiag = v.kernel.oscale.valid()
                         ? ad::rep_rows(v.kernel.oscale, n_data)
                         : ad::Var<S>(t.constant(ad::Mat<S>::Ones(n_data, 1)));
  if (kdiag.cols() != 1) kdiag = ad::transpose(kdiag);
  ad::Var<S> svar = ad::add(ad::sub(kdiag, t1), t2);  // N x 1

  // expected log-likelihood, exact for Gaussian noise
  ad::Var<S> resid = ad::sub(t.constant(y), mu);
  ad::Var<S> quad = ad::sum(ad::add(ad::mul(resid, resid), svar));
  ad::Var<S> inv_2s2 = ad::div(quad, ad::scale(v.sigma2, S(2)));
  ad::Var<S> log_norm =
      ad::scale(ad::log_(ad::scale(v.sigma2, S(2.0 * M_PI))), S(0.5 * n_data));
  ad::Var<S> e_term = ad::neg(ad::add(log_norm, inv_2s2));

  // KL[q(u) || p(u)]
  ad::Var<S> kinv_l = ad::chol_solve(kzz, v.L);
  ad::Var<S> tr_term = ad::sum(ad::mul(kinv_l, v.L));
  ad::Var<S> mkm = ad::sum(ad::mul(v.m, alpha));
  ad::Var<S> logdet_k = ad::logdet_spd(kzz);
  ad::Var<S> ldiag = ad::diag_vec(v.L);
  ad::Var<S> logdet_lam = ad::scale(ad::sum(ad::log_(ldiag)), S(2));
  ad::Var<S> kl = ad::scale(
      ad::add(ad::sub(ad::add(tr_term, mkm), t.constant_scalar(S(m_ind))),
              ad::sub(logdet_k, logdet_lam)),
      S(0.5));

  return ad::sub(e_term, kl);
}

/// Exact-GP log marginal likelihood node on fixed inputs X.
template <class S>
ad::Var<S> gpr_log_marginal_graph(ad::Tape<S>& t, const KernelVars<S>& k, ad::Var<S> sigma2,
                                  ad::Var<S> X, const ad::Mat<S>& y) {
  const int n = int(y.rows());
  ad::Var<S> kxx = kernel_gram(t, k, X, X);
  ad::Var<S> eye = t.constant(ad::Mat<S>::Identity(n, n));
  ad::Var<S> kn = ad::add(kxx, ad::bscale(eye, sigma2));
  ad::Var<S> yv = t.constant(y);
  ad::Var<S> sol = ad::chol_solve(kn, yv);
  ad::Var<S> quad = ad::sum(ad::mul(yv, sol));
  ad::Var<S> ld = ad::logdet_spd(kn);
  ad::Var<S> c = t.constant_scalar(S(0.5 * n * std::log(2.0 * M_PI)));
  return ad::neg(ad::add(ad::add(ad::scale(ld, S(0.5)), ad::scale(quad, S(0.5))), c));
}

}  // namespace graph

}  // namespace dkmc
