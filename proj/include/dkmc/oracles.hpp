#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dkmc {

double norm_cdf(double x);

/// European Black-Scholes price with continuous dividend yield.
double black_scholes(bool is_call, double S, double K, double r, double q, double sigma,
                     double T);

/// CRR binomial tree restricted to the Bermudan exercise grid: `steps` is
/// rounded up to a multiple of `dates` and exercise is allowed only at the
/// tree levels that land on t_i = i*T/dates, i >= 1.
double crr_bermudan(bool is_put, double S0, double K, double r, double q, double sigma,
                    double T, int dates, int steps);

/// 1-d Merton jump-diffusion Bermudan value by dynamic programming on a log
/// grid: the one-step transition density is the Poisson mixture of normals,
/// integrated bucket-wise, and the value is convolved backwards across the
/// `dates` equally spaced exercise dates. kappa is the compensator actually
/// used in the drift (pass the same convention as the simulator under test).
double mjd_bermudan_grid(bool is_put, double S0, double K, double r, double q, double sigma,
                         double lambda, double mu_j, double sigma_j, double kappa, double T,
                         int dates, int grid_points = 2401, double width_sds = 9.0);

struct OracleCheck {
  std::string name;
  bool passed = false;
  double metric = 0.0;     // what was measured
  double threshold = 0.0;  // what it had to stay below
  std::string detail;
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

/// The verification battery: gradient checks against central differences,
/// martingale checks for both simulators, the Black-Scholes reduction of the
/// geometric basket, binomial-tree comparison of the Bermudan recursion, the
/// ELBO <= exact log marginal sweep, and the jump-diffusion grid benchmark.
/// Deterministic given the seed.
OracleReport run_oracle_suite(std::uint64_t master_seed, std::ostream* log = nullptr);

}  // namespace dkmc
