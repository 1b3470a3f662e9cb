#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "dkmc/gp.hpp"
#include "dkmc/optim.hpp"
#include "dkmc/rng.hpp"

using namespace dkmc;

TEST_CASE("rbf kernel values") {
  RbfKernel k;
  k.gamma = 2.0;
  Eigen::VectorXd x(2), y(2);
  x << 0.5, -1.0;
  CHECK(rbf(k, x, x) == doctest::Approx(1.0));
  y << 0.5, 1.0;  // distance 2 = gamma
  CHECK(rbf(k, x, y) == doctest::Approx(std::exp(-1.0)));

  RbfKernel k5;
  k5.gamma = 5.0;
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;
  CHECK(rbf(k5, a, b) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("kernel matrix: identical points, single pair, jittered PSD") {
  RbfKernel k;
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(3, 2, 0.7);
  const Eigen::MatrixXd K = kernel_matrix(k, X, X);
  CHECK((K - Eigen::MatrixXd::Ones(3, 3)).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.0;
  b << 1.0;  // distance = gamma = 1
  CHECK(kernel_matrix(k, a, b)(0, 0) == doctest::Approx(std::exp(-1.0)));

  RandomStream rs(3, 0, 0, 0);
  Eigen::MatrixXd R(20, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 3; ++j) R(i, j) = rs.normal();
  Eigen::MatrixXd KR = kernel_matrix(k, R, R);
  CHECK((KR - KR.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  KR.diagonal().array() += 1e-6;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(KR);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("exact gp posterior mean: closed forms") {
  ExactGpModel m;
  m.X = Eigen::MatrixXd::Zero(1, 1);
  m.y = Eigen::VectorXd::Constant(1, 2.0);
  m.sigma = 0.5;
  const Eigen::VectorXd pred = gpr_posterior_mean(m, m.X);
  CHECK(pred[0] == doctest::Approx(2.0 / (1.0 + 0.25)).epsilon(1e-9));

  m.sigma = 1e-8;  // noiseless limit: interpolation
  CHECK(gpr_posterior_mean(m, m.X)[0] == doctest::Approx(2.0).epsilon(1e-6));

  m.sigma = 0.3;
  m.X = Eigen::MatrixXd::Random(6, 2);
  m.y = Eigen::VectorXd::Zero(6);
  CHECK(gpr_posterior_mean(m, m.X).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("exact gp log marginal: scalar cases and permutation invariance") {
  ExactGpModel m;
  m.X = Eigen::MatrixXd::Zero(1, 1);
  m.y = Eigen::VectorXd::Zero(1);
  m.sigma = 0.4;
  const double s2 = 0.16;
  CHECK(gpr_log_marginal(m) == doctest::Approx(-0.5 * std::log(2.0 * M_PI * (1.0 + s2))));

  m.y[0] = 1.7;
  CHECK(gpr_log_marginal(m) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI * (1.0 + s2)) -
                        1.7 * 1.7 / (2.0 * (1.0 + s2))));

  RandomStream rs(8, 0, 0, 0);
  ExactGpModel big;
  big.X.resize(12, 2);
  big.y.resize(12);
  for (int i = 0; i < 12; ++i) {
    big.X(i, 0) = rs.normal();
    big.X(i, 1) = rs.normal();
    big.y[i] = rs.normal();
  }
  big.sigma = 0.3;
  const double base = gpr_log_marginal(big);
  ExactGpModel perm = big;
  perm.X = big.X.colwise().reverse().eval();
  perm.y = big.y.reverse().eval();
  CHECK(gpr_log_marginal(perm) == doctest::Approx(base).epsilon(1e-10));
}

namespace {
SvgpState make_state(int m_ind, int dp, RandomStream& rs) {
  SvgpState st;
  st.Z.resize(m_ind, dp);
  for (int i = 0; i < m_ind; ++i)
    for (int j = 0; j < dp; ++j) st.Z(i, j) = 2.0 * rs.uniform() - 1.0;
  st.m = Eigen::VectorXd::Zero(m_ind);
  st.L_lambda = 0.1 * Eigen::MatrixXd::Identity(m_ind, m_ind);
  return st;
}
}  // namespace

TEST_CASE("svgp predictions: zero mean, scalar reduction, prior variance") {
  RandomStream rs(4, 0, 0, 0);
  SvgpState st = make_state(5, 2, rs);
  Eigen::VectorXd q(2);
  q << 0.2, -0.4;
  CHECK(svgp_predict(st, q).first == doctest::Approx(0.0));

  SvgpState one = make_state(1, 2, rs);
  one.m[0] = 1.3;
  one.L_lambda(0, 0) = 0.6;
  const auto [mean, var] = svgp_predict(one, one.Z.row(0));
  CHECK(mean == doctest::Approx(1.3).epsilon(1e-5));
  CHECK(var == doctest::Approx(0.36).epsilon(1e-4));

  // Lambda = K_ZZ makes the variance collapse to the prior
  SvgpState pri = make_state(4, 2, rs);
  Eigen::MatrixXd kzz = kernel_matrix(pri.kernel, pri.Z, pri.Z);
  kzz.diagonal().array() += pri.jitter;
  pri.L_lambda = Eigen::LLT<Eigen::MatrixXd>(kzz).matrixL();
  Eigen::VectorXd far(2);
  far << 0.9, -0.8;
  const auto [m2, v2] = svgp_predict(pri, far);
  (void)m2;
  RbfKernel k;
  CHECK(v2 == doctest::Approx(rbf(k, far, far)).epsilon(1e-5));
}

TEST_CASE("elbo at the prior state reduces to the scalar closed form") {
  // q(u) = prior, single data point, kernel constant 1 (query on top of z)
  SvgpState st;
  st.Z = Eigen::MatrixXd::Zero(1, 1);
  st.m = Eigen::VectorXd::Zero(1);
  st.sigma = 0.7;
  Eigen::MatrixXd kzz = kernel_matrix(st.kernel, st.Z, st.Z);
  kzz.diagonal().array() += st.jitter;
  st.L_lambda = Eigen::LLT<Eigen::MatrixXd>(kzz).matrixL();
  const Eigen::MatrixXd G = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd y(1);
  y << 0.9;
  const double s2 = st.sigma * st.sigma;
  const double expected =
      -0.5 * std::log(2.0 * M_PI * s2) - y[0] * y[0] / (2.0 * s2) - 1.0 / (2.0 * s2);
  CHECK(elbo(st, G, y) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("elbo stays finite when sigma doubles") {
  RandomStream rs(21, 0, 0, 0);
  SvgpState st = make_state(3, 2, rs);
  Eigen::MatrixXd G(8, 2);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    G(i, 0) = 2.0 * rs.uniform() - 1.0;
    G(i, 1) = 2.0 * rs.uniform() - 1.0;
    y[i] = rs.normal();
  }
  const double e1 = elbo(st, G, y);
  st.sigma *= 2.0;
  const double e2 = elbo(st, G, y);
  CHECK(std::isfinite(e1));
  CHECK(std::isfinite(e2));
  CHECK(e1 != e2);
}

TEST_CASE("elbo never exceeds the exact log marginal (100 random states)") {
  RandomStream rs(2024, 0, 0, 0);
  const int n = 24, dp = 2;
  Eigen::MatrixXd G(n, dp);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dp; ++j) G(i, j) = 2.0 * rs.uniform() - 1.0;
    y[i] = std::sin(2.5 * G(i, 0)) + 0.2 * rs.normal();
  }
  double worst = -1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const int m_ind = 1 + int(rs.uniform() * 10);
    SvgpState st = make_state(m_ind, dp, rs);
    for (int i = 0; i < m_ind; ++i) st.m[i] = rs.normal();
    for (int i = 0; i < m_ind; ++i) {
      for (int j = 0; j < i; ++j) st.L_lambda(i, j) = 0.4 * rs.normal();
      st.L_lambda(i, i) = 0.05 + rs.uniform();
    }
    st.kernel.gamma = 0.3 + 2.0 * rs.uniform();
    st.sigma = 0.1 + 0.6 * rs.uniform();
    ExactGpModel exact{G, y, st.kernel, st.sigma};
    worst = std::max(worst, elbo(st, G, y) - gpr_log_marginal(exact));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("kl divergence: zero at the prior, scalar case, non-negative") {
  RandomStream rs(55, 0, 0, 0);
  Eigen::MatrixXd Z(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) Z(i, j) = rs.normal();
  RbfKernel k;
  const Eigen::MatrixXd kzz = kernel_matrix(k, Z, Z);
  CHECK(kl_gaussian(Eigen::VectorXd::Zero(4), kzz, kzz) == doctest::Approx(0.0).epsilon(1e-9));

  Eigen::VectorXd m1(1);
  m1 << 2.0;
  CHECK(kl_gaussian(m1, Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1)) ==
        doctest::Approx(2.0));

  for (int trial = 0; trial < 50; ++trial) {
    const int m_ind = 1 + int(rs.uniform() * 6);
    Eigen::MatrixXd A(m_ind, m_ind);
    for (int i = 0; i < m_ind; ++i)
      for (int j = 0; j < m_ind; ++j) A(i, j) = rs.normal();
    const Eigen::MatrixXd lam =
        A * A.transpose() + 0.01 * Eigen::MatrixXd::Identity(m_ind, m_ind);
    Eigen::MatrixXd Zt(m_ind, 2);
    for (int i = 0; i < m_ind; ++i)
      for (int j = 0; j < 2; ++j) Zt(i, j) = rs.normal();
    const Eigen::MatrixXd kz = kernel_matrix(k, Zt, Zt);
    Eigen::VectorXd mv(m_ind);
    for (int i = 0; i < m_ind; ++i) mv[i] = rs.normal();
    CHECK(kl_gaussian(mv, lam, kz) >= -1e-10);
  }
}

TEST_CASE("maximizing the elbo over (m, Lambda) recovers the exact posterior mean") {
  // M = N, Z = training inputs, kernel and noise fixed. The points are kept
  // well separated relative to gamma so K_ZZ stays well conditioned and the
  // plain SGD ascent can actually reach the optimum.
  const int n = 6;
  Eigen::MatrixXd G(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    G(i, 0) = -1.0 + 2.0 * i / (n - 1);
    y[i] = std::sin(2.0 * G(i, 0));
  }
  RbfKernel kern;
  kern.gamma = 0.35;
  const double sigma = 0.4;

  using S = double;
  ad::Mat<S> m = ad::Mat<S>::Zero(n, 1);
  ad::Mat<S> lraw = ad::Mat<S>::Zero(n, n);
  lraw.diagonal().array() = std::log(std::expm1(0.1));
  Sgd<S> opt({0.05, 0.9, 0.0});
  for (int it = 0; it < 12000; ++it) {
    ad::Tape<S> t;
    auto mv = t.leaf(m);
    auto lv = t.leaf(lraw);
    graph::SvgpCoreVars<S> core;
    core.Z = t.constant(G);
    core.m = mv;
    core.L = ad::add(ad::tril_strict(lv), ad::diag_embed(ad::softplus(ad::diag_vec(lv))));
    core.kernel = graph::kernel_vars(t, t.constant_scalar(kern.gamma), ad::Var<S>{});
    core.sigma2 = t.constant_scalar(sigma * sigma);
    auto loss = ad::scale(graph::svgp_elbo(t, core, t.constant(G), ad::Mat<S>(y), 1e-6, 1e-4),
                          S(-1.0 / n));
    t.backward(loss);
    std::vector<ad::Mat<S>> grads{t.grad_of(mv), t.grad_of(lv)};
    opt.step({&m, &lraw}, grads);
  }

  SvgpState st;
  st.Z = G;
  st.m = m.col(0);
  Eigen::MatrixXd L = lraw.triangularView<Eigen::StrictlyLower>();
  for (int i = 0; i < n; ++i) L(i, i) = std::log1p(std::exp(lraw(i, i)));
  st.L_lambda = L;
  st.kernel = kern;
  st.sigma = sigma;
  Eigen::VectorXd means, vars;
  svgp_predict_batch(st, G, means, vars);

  ExactGpModel exact{G, y, kern, sigma};
  const Eigen::VectorXd ref = gpr_posterior_mean(exact, G);
  const double rms = std::sqrt((means - ref).squaredNorm() / n);
  CHECK(rms < 1e-4);
}

TEST_CASE("elbo and log-marginal graphs pass finite-difference checks") {
  RandomStream rs(31, 0, 0, 0);
  const int n = 12, m_ind = 3, dp = 2;
  Eigen::MatrixXd G(n, dp);
  Eigen::MatrixXd y(n, 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dp; ++j) G(i, j) = 2.0 * rs.uniform() - 1.0;
    y(i, 0) = rs.normal();
  }
  Eigen::MatrixXd Z0(m_ind, dp);
  for (int i = 0; i < m_ind; ++i)
    for (int j = 0; j < dp; ++j) Z0(i, j) = rs.normal();
  Eigen::MatrixXd m0 = Eigen::MatrixXd::Constant(m_ind, 1, 0.2);
  Eigen::MatrixXd l0 = Eigen::MatrixXd::Constant(m_ind, m_ind, 0.1);
  Eigen::MatrixXd ug0 = Eigen::MatrixXd::Constant(1, 1, 0.3);
  Eigen::MatrixXd us0 = Eigen::MatrixXd::Constant(1, 1, -0.5);

  auto build_elbo = [&](ad::Tape<double>& t, std::vector<ad::Var<double>>& lv) {
    graph::SvgpCoreVars<double> core;
    core.Z = lv[0];
    core.m = lv[1];
    core.L = ad::add(ad::tril_strict(lv[2]), ad::diag_embed(ad::softplus(ad::diag_vec(lv[2]))));
    core.kernel = graph::kernel_vars(t, ad::softplus(lv[3]), ad::Var<double>{});
    auto sg = ad::softplus(lv[4]);
    core.sigma2 = ad::mul(sg, sg);
    return graph::svgp_elbo(t, core, t.constant(G), y, 1e-6, 1e-4);
  };
  CHECK(finite_diff_check<double>(build_elbo, {Z0, m0, l0, ug0, us0}, 1e-5) < 1e-4);

  auto build_logml = [&](ad::Tape<double>& t, std::vector<ad::Var<double>>& lv) {
    auto kv = graph::kernel_vars(t, ad::softplus(lv[0]), ad::Var<double>{});
    auto sg = ad::softplus(lv[1]);
    return graph::gpr_log_marginal_graph(t, kv, ad::mul(sg, sg), t.constant(G), y);
  };
  CHECK(finite_diff_check<double>(build_logml, {ug0, us0}, 1e-5) < 1e-6);
}
