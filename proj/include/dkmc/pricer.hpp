#pragma once

#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dkmc/dkl.hpp"
#include "dkmc/lsm.hpp"
#include "dkmc/payoff.hpp"
#include "dkmc/sim.hpp"

namespace dkmc {

struct LsmPolySpec {
  int degree = 2;
  bool cross_terms = true;
};

struct ExactGprSpec {
  int opt_iterations = 20;
  double lr = 0.1;
  double momentum = 0.9;
  int path_cap = 2000;  // 0 = train on every path (O(N^3) per exercise date)
  double gamma_init = 1.0;
  double sigma_init = 0.1;
  bool fixed_hyperparameters = false;  // skip the marginal-likelihood ascent
};

struct DklSpec {
  DklConfig config;
};

using RegressorKind = std::variant<LsmPolySpec, ExactGprSpec, DklSpec>;

/// Cross-sectional continuation-value regressor trained at one exercise
/// date. fit() owns its state; predict is pure afterwards.
class ContinuationRegressor {
 public:
  virtual ~ContinuationRegressor() = default;
  virtual void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed) = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  virtual int input_dim() const = 0;
};

std::unique_ptr<ContinuationRegressor> make_regressor(const RegressorKind& kind);

struct LsOptions {
  bool itm_filter = false;          // train only on in-the-money paths
  bool keep_first_regressor = false;  // retain the t_{n-1} regressor (surface tool)
};

struct LsResult {
  double price = 0.0;
  std::unique_ptr<ContinuationRegressor> first_regressor;  // trained at t_{n-1}
  double first_discount = 1.0;                             // D_{n-1,n}
};

/// Backward induction over the exercise grid: V_n = h(S_n); at each earlier
/// date the regressor is trained on (S_i, V_{i+1}) over all paths, a path
/// exercises iff h > 0 and h > D * prediction, and values cascade through
/// the one-step discount. Returns D_{0,1} * mean(V_1).
LsResult longstaff_schwartz(const PathSet& paths, const PayoffSpec& payoff, double r,
                            const RegressorKind& regressor, std::uint64_t seed,
                            const LsOptions& options = {});

/// e^{-rT} * mean of h(S_T); the European lower-bound oracle.
double european_mc_price(const PathSet& paths, const PayoffSpec& payoff, double r);

struct BatchJob {
  std::variant<GbmParams, MjdParams> model;
  PayoffSpec payoff;
  RegressorKind regressor = LsmPolySpec{};
  int batches = 10;
  int paths = 10000;
  std::uint64_t master_seed = 0;
  bool itm_filter = false;
  int workers = 1;
};

struct PriceEstimate {
  double price = 0.0;  // mean over batches
  std::vector<double> per_batch;
  double std_dev = 0.0;  // sample (n-1) convention; 0 with a flag for 1 batch
  bool single_batch = false;
  double wall_time_s = 0.0;
};

PriceEstimate price_batches(const BatchJob& job);

struct SurfaceResult {
  std::vector<double> s1, s2, value;  // row-major: s1 outer, s2 inner
  int grid_points = 0;
  /// Count of decreases along s1 at the top s2 slice (the monotonicity
  /// diagnostic; the exact continuation surface increases in s1).
  int slice_violations = 0;
  int total_violations = 0;  // over all s2 slices
};

/// Discounted continuation estimates D * regressor(s1, s2) on a square
/// grid. Throws UnsupportedDimensionError unless the regressor is 2-d.
SurfaceResult continuation_surface(const ContinuationRegressor& reg, double discount_factor,
                                   double lo = 30.0, double hi = 180.0, int points = 76);

void write_surface_csv(const SurfaceResult& s, std::ostream& os);

}  // namespace dkmc
