#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dkmc/errors.hpp"

namespace dkmc {

struct GbmParams {
  int d = 1;
  Eigen::VectorXd s0;     // initial prices
  double r = 0.0;         // risk-free rate, per year
  Eigen::VectorXd q;      // dividend rates, per asset
  Eigen::VectorXd sigma;  // volatilities, per asset
  Eigen::MatrixXd rho;    // correlation of the Brownian drivers
  double T = 1.0;         // maturity, years
  int n = 1;              // number of exercise dates

  /// Equal-parameter convenience constructor (the common experiment shape).
  static GbmParams equal(int d, double s0, double r, double q, double sigma, double rho_offdiag,
                         double T, int n);

  void validate() const;  // throws InvalidConfigError
};

enum class KappaForm {
  Variance,  // exp(mu + sigma^2/2) - 1
  Literal,   // exp(mu + sigma/2) - 1
};

struct MjdParams {
  GbmParams base;
  double lambda_j = 0.0;    // jump intensity, per year
  Eigen::VectorXd mu_j;     // jump log-size means
  Eigen::VectorXd sigma_j;  // jump log-size standard deviations
  Eigen::MatrixXd rho_j;    // jump correlation matrix
  KappaForm kappa_form = KappaForm::Variance;

  /// Expected relative jump size per asset.
  Eigen::VectorXd kappa() const;

  void validate() const;
};

/// Simulated paths: values[(j*(n+1) + i)*d + nu] is asset nu of path j at
/// time index i (index 0 = time 0).
struct PathSet {
  int n_paths = 0;
  int n = 0;  // number of exercise dates; n+1 time indices
  int d = 0;
  std::vector<double> values;
  Eigen::VectorXd times;  // size n+1, times[0] = 0, times[n] = T
  std::uint64_t seed = 0;

  double at(int path, int step, int asset) const {
    return values[(static_cast<std::size_t>(path) * (n + 1) + step) * d + asset];
  }
  Eigen::Map<const Eigen::VectorXd> state(int path, int step) const {
    return {&values[(static_cast<std::size_t>(path) * (n + 1) + step) * d], d};
  }
  /// N x d matrix of all path states at one time index.
  Eigen::MatrixXd states_at(int step) const;

  /// Debug dump, one row per path, columns ordered time-major then asset
  /// (t0.a0, t0.a1, ..., t1.a0, ...).
  void write_csv(std::ostream& os) const;
  void write_binary(const std::string& path) const;
  static PathSet read_binary(const std::string& path);
};

/// Lower-triangular factor L with L*L^T = rho. Escalating diagonal jitter
/// (1e-10, x10 per retry, 1e-6 cap) is applied if the plain factorization
/// fails; NotPsdError after the cap.
Eigen::MatrixXd correlation_cholesky(const Eigen::MatrixXd& rho);

/// Equally spaced grid [0, T/n, ..., T], length n+1.
Eigen::VectorXd exercise_grid(double T, int n);

PathSet simulate_gbm(const GbmParams& params, int n_paths, std::uint64_t seed);
PathSet simulate_mjd(const MjdParams& params, int n_paths, std::uint64_t seed);

}  // namespace dkmc
