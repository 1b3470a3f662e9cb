#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "dkmc/dkl.hpp"
#include "dkmc/rng.hpp"

using namespace dkmc;

namespace {

// 1-d noisy sine, the standing toy regression problem
void make_sine(int n, std::uint64_t seed, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
  RandomStream rs(seed, 3, 0, 0);
  X.resize(n, 1);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 6.0 * rs.uniform() - 3.0;
    y[i] = std::sin(X(i, 0)) + 0.05 * rs.normal();
  }
}

DklConfig toy_config() {
  DklConfig cfg;
  cfg.hidden_dims = {64, 32};
  cfg.latent_dim = 2;
  cfg.inducing = 40;
  cfg.iterations = 1500;
  return cfg;
}

}  // namespace

TEST_CASE("zero targets collapse the predictions") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(200, 11, X, y);
  y.setZero();
  DklConfig cfg = toy_config();
  cfg.inducing = 20;
  cfg.iterations = 400;
  const DeepKernelModel model = train_dkl(X, y, cfg, 5);
  CHECK(model.predict_batch(X).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("sine toy: held-out rms under 0.1 after 1500 iterations") {
  Eigen::MatrixXd X, Xq;
  Eigen::VectorXd y, yq;
  make_sine(500, 21, X, y);
  make_sine(200, 22, Xq, yq);
  std::vector<double> history;
  const DeepKernelModel model = train_dkl(X, y, toy_config(), 7, &history);

  CHECK(history.size() == 1500);
  CHECK(history.back() < history.front());  // the loss went down

  Eigen::VectorXd pred = model.predict_batch(Xq);
  double rms = 0.0;
  for (int i = 0; i < Xq.rows(); ++i) rms += std::pow(pred[i] - std::sin(Xq(i, 0)), 2);
  rms = std::sqrt(rms / Xq.rows());
  CHECK(rms < 0.1);

  // training point sanity and determinism of prediction
  const double p0 = model.predict(X.row(0));
  CHECK(std::abs(p0 - std::sin(X(0, 0))) < 0.15);
  CHECK(model.predict(X.row(0)) == p0);
}

TEST_CASE("training is reproducible from the seed") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(150, 31, X, y);
  DklConfig cfg = toy_config();
  cfg.inducing = 15;
  cfg.iterations = 200;
  const DeepKernelModel a = train_dkl(X, y, cfg, 99);
  const DeepKernelModel b = train_dkl(X, y, cfg, 99);
  const Eigen::VectorXd pa = a.predict_batch(X), pb = b.predict_batch(X);
  CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("row permutation leaves the trained model essentially unchanged") {
  const int n = 40;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(n, 41, X, y);
  DklConfig cfg;
  cfg.hidden_dims = {8};
  cfg.latent_dim = 2;
  cfg.inducing = 5;
  cfg.iterations = 40;
  cfg.train_float64 = true;  // isolate summation-order effects
  const DeepKernelModel base = train_dkl(X, y, cfg, 13);

  Eigen::MatrixXd Xp(n, 1);
  Eigen::VectorXd yp(n);
  for (int i = 0; i < n; ++i) {
    Xp.row(i) = X.row(n - 1 - i);
    yp[i] = y[n - 1 - i];
  }
  const DeepKernelModel perm = train_dkl(Xp, yp, cfg, 13);

  Eigen::MatrixXd Q;
  Eigen::VectorXd dummy;
  make_sine(25, 42, Q, dummy);
  CHECK((base.predict_batch(Q) - perm.predict_batch(Q)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("latent embeddings stay inside the unit cube, clamping included") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(120, 51, X, y);
  DklConfig cfg = toy_config();
  cfg.inducing = 12;
  cfg.iterations = 150;
  const DeepKernelModel model = train_dkl(X, y, cfg, 3);

  Eigen::MatrixXd far(4, 1);
  far << -50.0, -3.0, 3.0, 50.0;  // far outside the training range
  const Eigen::MatrixXd G = model.embed(far);
  CHECK(G.maxCoeff() <= 1.0);
  CHECK(G.minCoeff() >= -1.0);
}

TEST_CASE("deep kernel: unit at coincident inputs, corner-to-corner value") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(100, 61, X, y);
  DklConfig cfg = toy_config();
  cfg.inducing = 10;
  cfg.iterations = 100;
  const DeepKernelModel model = train_dkl(X, y, cfg, 17);
  Eigen::VectorXd x0 = X.row(0);
  CHECK(model.kernel_value(x0, x0) == doctest::Approx(1.0));

  // hand-built model whose embeddings hit opposite corners of [-1,1]^2
  DeepKernelModel flat;
  flat.extractor.dims = {2, 2};
  flat.extractor.W = {Eigen::MatrixXd::Identity(2, 2)};
  flat.extractor.b = {Eigen::RowVectorXd::Zero(2)};
  flat.rescale.min = Eigen::RowVectorXd::Zero(2);
  flat.rescale.max = Eigen::RowVectorXd::Ones(2);
  flat.svgp.Z = Eigen::MatrixXd::Zero(1, 2);
  flat.svgp.m = Eigen::VectorXd::Zero(1);
  flat.svgp.L_lambda = Eigen::MatrixXd::Identity(1, 1);
  flat.svgp.kernel.gamma = 1.3;
  flat.alpha = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << 1.0, 1.0;
  CHECK(flat.kernel_value(lo, hi) ==
        doctest::Approx(std::exp(-8.0 / (1.3 * 1.3))).epsilon(1e-12));
  CHECK(flat.kernel_value(lo, hi) > 0.0);
  CHECK(flat.kernel_value(lo, hi) <= 1.0);
}

TEST_CASE("model checkpoints round-trip") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(100, 71, X, y);
  DklConfig cfg = toy_config();
  cfg.inducing = 10;
  cfg.iterations = 120;
  const DeepKernelModel model = train_dkl(X, y, cfg, 23);
  model.save("/tmp/dkmc_test_model.bin");
  const DeepKernelModel loaded = DeepKernelModel::load("/tmp/dkmc_test_model.bin");
  const Eigen::VectorXd a = model.predict_batch(X), b = loaded.predict_batch(X);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pathological targets raise TrainingDiverged") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(64, 81, X, y);
  y.setConstant(1e200);  // finite, but the squared residual overflows
  DklConfig cfg = toy_config();
  cfg.inducing = 8;
  cfg.iterations = 10;
  CHECK_THROWS_AS(train_dkl(X, y, cfg, 29), TrainingDivergedError);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  make_sine(30, 91, X, y);
  DklConfig cfg = toy_config();
  CHECK_THROWS_AS(train_dkl(X, y, cfg, 1), InvalidConfigError);  // n < inducing
  cfg.inducing = 8;
  y[0] = std::nan("");
  CHECK_THROWS_AS(train_dkl(X, y, cfg, 1), InvalidConfigError);
}
