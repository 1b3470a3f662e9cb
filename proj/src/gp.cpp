#include "dkmc/gp.hpp"

#include <cmath>

namespace dkmc {

double rbf(const RbfKernel& k, Eigen::Ref<const Eigen::VectorXd> x,
           Eigen::Ref<const Eigen::VectorXd> x2) {
  if (x.size() != x2.size()) throw ShapeMismatchError("rbf: input dimensions differ");
  const double sq = (x - x2).squaredNorm();
  return k.scale_value() * std::exp(-sq / (k.gamma * k.gamma));
}

Eigen::MatrixXd kernel_matrix(const RbfKernel& k, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& X2) {
  if (X.cols() != X2.cols()) throw ShapeMismatchError("kernel_matrix: latent dims differ");
  const Eigen::VectorXd sx = X.rowwise().squaredNorm();
  const Eigen::VectorXd sx2 = X2.rowwise().squaredNorm();
  Eigen::MatrixXd sq = -2.0 * X * X2.transpose();
  sq.colwise() += sx;
  sq.rowwise() += sx2.transpose();
  const double c = -1.0 / (k.gamma * k.gamma);
  return k.scale_value() * (sq * c).array().exp();
}

double choose_spd_jitter(const Eigen::MatrixXd& A, double base, double max_jitter,
                         bool try_plain) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (try_plain) {
    llt.compute(A);
    if (llt.info() == Eigen::Success) return 0.0;
  }
  for (double eps = base; eps <= max_jitter * (1.0 + 1e-12); eps *= 10.0) {
    Eigen::MatrixXd shifted = A;
    shifted.diagonal().array() += eps;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return eps;
  }
  throw NotPsdError("matrix not positive definite after jitter escalation");
}

namespace {

// Factor K + sigma^2 I; sigma^2 regularizes already, jitter only on failure.
Eigen::LLT<Eigen::MatrixXd> factor_noisy_gram(const Eigen::MatrixXd& K, double sigma) {
  Eigen::MatrixXd kn = K;
  kn.diagonal().array() += sigma * sigma;
  const double eps = choose_spd_jitter(kn, 1e-6, 1e-4, true);
  if (eps > 0.0) kn.diagonal().array() += eps;
  return Eigen::LLT<Eigen::MatrixXd>(kn);
}

}  // namespace

Eigen::VectorXd gpr_posterior_mean(const ExactGpModel& model, const Eigen::MatrixXd& Xq) {
  auto llt = factor_noisy_gram(kernel_matrix(model.kernel, model.X, model.X), model.sigma);
  const Eigen::VectorXd alpha = llt.solve(model.y);
  // stream query blocks so K(Xq, X) never materializes whole at large N
  const int block = 2048;
  Eigen::VectorXd out(Xq.rows());
  for (int start = 0; start < Xq.rows(); start += block) {
    const int len = std::min<int>(block, int(Xq.rows()) - start);
    out.segment(start, len) =
        kernel_matrix(model.kernel, Xq.middleRows(start, len), model.X) * alpha;
  }
  return out;
}

double gpr_log_marginal(const ExactGpModel& model) {
  const int n = int(model.y.size());
  auto llt = factor_noisy_gram(kernel_matrix(model.kernel, model.X, model.X), model.sigma);
  const double logdet =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double quad = model.y.dot(llt.solve(model.y));
  return -0.5 * logdet - 0.5 * quad - 0.5 * n * std::log(2.0 * M_PI);
}

namespace {

struct SvgpFactored {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
};

SvgpFactored factor_svgp(const SvgpState& s) {
  Eigen::MatrixXd kzz = kernel_matrix(s.kernel, s.Z, s.Z);
  const double eps = choose_spd_jitter(kzz, s.jitter, 1e-4, false);
  kzz.diagonal().array() += eps;
  SvgpFactored f{Eigen::LLT<Eigen::MatrixXd>(kzz), {}};
  f.alpha = f.llt.solve(s.m);
  return f;
}

}  // namespace

void svgp_predict_batch(const SvgpState& state, const Eigen::MatrixXd& Gq,
                        Eigen::VectorXd& means, Eigen::VectorXd& vars) {
  auto f = factor_svgp(state);
  const Eigen::MatrixXd kqz = kernel_matrix(state.kernel, Gq, state.Z);  // P x M
  means = kqz * f.alpha;
  const Eigen::MatrixXd B = f.llt.solve(kqz.transpose());  // M x P
  const Eigen::VectorXd t1 = (kqz.transpose().cwiseProduct(B)).colwise().sum();
  const Eigen::MatrixXd ltb = state.L_lambda.transpose() * B;
  const Eigen::VectorXd t2 = ltb.cwiseProduct(ltb).colwise().sum();
  vars = Eigen::VectorXd::Constant(Gq.rows(), state.kernel.scale_value()) - t1 + t2;
}

std::pair<double, double> svgp_predict(const SvgpState& state,
                                       Eigen::Ref<const Eigen::VectorXd> xq) {
  Eigen::VectorXd means, vars;
  svgp_predict_batch(state, xq.transpose(), means, vars);
  return {means[0], vars[0]};
}

double kl_gaussian(const Eigen::VectorXd& m, const Eigen::MatrixXd& lambda,
                   const Eigen::MatrixXd& kzz) {
  const int M = int(m.size());
  if (lambda.rows() != M || kzz.rows() != M) throw ShapeMismatchError("kl_gaussian: shape mismatch");
  Eigen::MatrixXd k = kzz;
  const double eps = choose_spd_jitter(k, 1e-10, 1e-6, true);
  if (eps > 0.0) k.diagonal().array() += eps;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  const double tr = llt.solve(lambda).trace();
  const double quad = m.dot(llt.solve(m));
  const double logdet_k = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();

  Eigen::MatrixXd lam = lambda;
  const double eps_l = choose_spd_jitter(lam, 1e-10, 1e-6, true);
  if (eps_l > 0.0) lam.diagonal().array() += eps_l;
  Eigen::LLT<Eigen::MatrixXd> llt_l(lam);
  const double logdet_lam =
      2.0 * Eigen::MatrixXd(llt_l.matrixL()).diagonal().array().log().sum();

  return 0.5 * (tr + quad - M + logdet_k - logdet_lam);
}

double elbo(const SvgpState& state, const Eigen::MatrixXd& G, const Eigen::VectorXd& y) {
  if (G.rows() != y.size()) throw ShapeMismatchError("elbo: |G| != |y|");
  ad::Tape<double> t;
  graph::SvgpCoreVars<double> v;
  v.Z = t.constant(state.Z);
  v.m = t.constant(state.m);
  v.L = t.constant(state.L_lambda);
  ad::Var<double> gamma = t.constant_scalar(state.kernel.gamma);
  ad::Var<double> oscale =
      state.kernel.use_output_scale ? t.constant_scalar(state.kernel.output_scale)
                                    : ad::Var<double>{};
  v.kernel = graph::kernel_vars(t, gamma, oscale);
  v.sigma2 = t.constant_scalar(state.sigma * state.sigma);
  ad::Var<double> g = t.constant(G);
  return graph::svgp_elbo(t, v, g, Eigen::MatrixXd(y), state.jitter, 1e-4).scalar();
}

}  // namespace dkmc
