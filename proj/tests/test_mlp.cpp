#include <doctest.h>

#include <cmath>

#include "dkmc/mlp.hpp"
#include "dkmc/rng.hpp"

using namespace dkmc;

TEST_CASE("zero weights give zero outputs") {
  FeatureExtractor f;
  f.dims = {3, 4, 2};
  f.W = {Eigen::MatrixXd::Zero(3, 4), Eigen::MatrixXd::Zero(4, 2)};
  f.b = {Eigen::RowVectorXd::Zero(4), Eigen::RowVectorXd::Zero(2)};
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 3);
  CHECK(mlp_forward(f, X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identity slice passes non-negative inputs through") {
  FeatureExtractor f;
  f.dims = {3, 2};
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(3, 2);
  W(0, 0) = 1.0;
  W(1, 1) = 1.0;
  f.W = {W};
  f.b = {Eigen::RowVectorXd::Zero(2)};
  Eigen::MatrixXd X(2, 3);
  X << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  const Eigen::MatrixXd out = mlp_forward(f, X);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(1, 0) == 4.0);
  CHECK(out(1, 1) == 5.0);
}

TEST_CASE("two-layer composition matches a hand evaluation") {
  FeatureExtractor f;
  f.dims = {2, 2, 1};
  Eigen::MatrixXd W1(2, 2), W2(2, 1);
  W1 << 1.0, -2.0, 0.5, 1.5;
  W2 << 2.0, -1.0;
  Eigen::RowVectorXd b1(2), b2(1);
  b1 << 0.1, -0.2;
  b2 << 0.05;
  f.W = {W1, W2};
  f.b = {b1, b2};
  Eigen::MatrixXd X(1, 2);
  X << 0.7, -0.3;
  // a1 = [0.7 - 0.15 + 0.1, -1.4 - 0.45 - 0.2] = [0.65, -2.05]
  // relu -> [0.65, 0]; out = 0.65*2 + 0.05 = 1.35
  CHECK(mlp_forward(f, X)(0, 0) == doctest::Approx(1.35).epsilon(1e-12));
}

TEST_CASE("initialization stays within the fan-in bound and is seed-stable") {
  RandomStream rs(9, 1, 0, 0);
  FeatureExtractor f = init_extractor({10, 20, 2}, rs);
  const double bound0 = std::sqrt(1.0 / 10.0);
  CHECK(f.W[0].cwiseAbs().maxCoeff() <= bound0);
  CHECK(f.W[0].cwiseAbs().maxCoeff() > 0.1 * bound0);
  CHECK(f.b[0].cwiseAbs().maxCoeff() <= bound0);
  RandomStream rs2(9, 1, 0, 0);
  FeatureExtractor g = init_extractor({10, 20, 2}, rs2);
  CHECK(f.W[0] == g.W[0]);
  CHECK(f.W[1] == g.W[1]);
}

TEST_CASE("rescale maps the batch into [-1,1] with the documented cases") {
  Eigen::MatrixXd latent(3, 2);
  latent << 0.0, 10.0, 5.0, 20.0, 10.0, 30.0;
  const RescaleStats stats = compute_rescale_stats(latent);
  CHECK(stats.min(0) == 0.0);
  CHECK(stats.max(1) == 30.0);

  const Eigen::MatrixXd scaled = rescale_l(stats, latent);
  CHECK(scaled(0, 0) == -1.0);  // batch minimum
  CHECK(scaled(1, 0) == 0.0);   // midpoint
  CHECK(scaled(2, 1) == 1.0);   // batch maximum

  Eigen::MatrixXd query(2, 2);
  query << -5.0, 40.0, 2.5, 15.0;
  const Eigen::MatrixXd q = rescale_l(stats, query);
  CHECK(q(0, 0) == -1.0);  // below min clamps
  CHECK(q(0, 1) == 1.0);   // above max clamps
  CHECK(q(1, 0) == doctest::Approx(0.5 - 1.0));
  CHECK(q(1, 1) == doctest::Approx(2.0 * 5.0 / 20.0 - 1.0));
}

TEST_CASE("degenerate rescale dimension maps to zero") {
  Eigen::MatrixXd latent(3, 2);
  latent << 1.0, 7.0, 1.0, 8.0, 1.0, 9.0;
  const RescaleStats stats = compute_rescale_stats(latent);
  const Eigen::MatrixXd out = rescale_l(stats, latent);
  CHECK(out.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out(2, 1) == 1.0);
}

TEST_CASE("tape rescale agrees with the plain map on the training batch") {
  RandomStream rs(17, 0, 0, 0);
  Eigen::MatrixXd latent(12, 3);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 3; ++j) latent(i, j) = 5.0 * rs.normal();
  ad::Tape<double> t;
  auto lv = t.constant(latent);
  const Eigen::MatrixXd on_tape = graph::rescale(t, lv).value();
  const Eigen::MatrixXd plain = rescale_l(compute_rescale_stats(latent), latent);
  CHECK((on_tape - plain).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(on_tape.maxCoeff() <= 1.0);
  CHECK(on_tape.minCoeff() >= -1.0);
}

TEST_CASE("tape mlp forward agrees with the plain forward") {
  RandomStream rs(23, 0, 0, 0);
  FeatureExtractor f = init_extractor({4, 8, 2}, rs);
  Eigen::MatrixXd X(7, 4);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 4; ++j) X(i, j) = rs.normal();
  ad::Tape<double> t;
  std::vector<ad::Var<double>> Wv, bv;
  for (const auto& w : f.W) Wv.push_back(t.constant(w));
  for (const auto& b : f.b) bv.push_back(t.constant(Eigen::MatrixXd(b)));
  const Eigen::MatrixXd on_tape = graph::mlp_forward(t, Wv, bv, t.constant(X)).value();
  CHECK((on_tape - mlp_forward(f, X)).cwiseAbs().maxCoeff() < 1e-14);
}
