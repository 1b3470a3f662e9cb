#include "dkmc/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <Eigen/Cholesky>

#include "dkmc/rng.hpp"

namespace dkmc {

GbmParams GbmParams::equal(int d, double s0, double r, double q, double sigma, double rho_offdiag,
                           double T, int n) {
  GbmParams p;
  p.d = d;
  p.s0 = Eigen::VectorXd::Constant(d, s0);
  p.r = r;
  p.q = Eigen::VectorXd::Constant(d, q);
  p.sigma = Eigen::VectorXd::Constant(d, sigma);
  p.rho = Eigen::MatrixXd::Constant(d, d, rho_offdiag);
  p.rho.diagonal().setOnes();
  p.T = T;
  p.n = n;
  return p;
}

void GbmParams::validate() const {
  if (d < 1) throw InvalidConfigError("asset count must be >= 1");
  if (n < 1) throw InvalidConfigError("need at least one exercise date");
  if (T <= 0.0) throw InvalidConfigError("maturity must be positive");
  if (s0.size() != d || q.size() != d || sigma.size() != d)
    throw InvalidConfigError("per-asset parameter size mismatch");
  if (rho.rows() != d || rho.cols() != d) throw InvalidConfigError("rho must be d x d");
  if ((s0.array() <= 0.0).any()) throw InvalidConfigError("initial prices must be positive");
  if ((sigma.array() < 0.0).any()) throw InvalidConfigError("volatilities must be non-negative");
  for (int i = 0; i < d; ++i) {
    if (std::abs(rho(i, i) - 1.0) > 1e-12) throw InvalidConfigError("rho diagonal must be 1");
    for (int j = 0; j < i; ++j)
      if (std::abs(rho(i, j) - rho(j, i)) > 1e-12) throw InvalidConfigError("rho must be symmetric");
  }
}

Eigen::VectorXd MjdParams::kappa() const {
  if (kappa_form == KappaForm::Variance)
    return (mu_j.array() + 0.5 * sigma_j.array().square()).exp() - 1.0;
  return (mu_j.array() + 0.5 * sigma_j.array()).exp() - 1.0;
}

void MjdParams::validate() const {
  base.validate();
  const int d = base.d;
  if (lambda_j < 0.0) throw InvalidConfigError("jump intensity must be non-negative");
  if (mu_j.size() != d || sigma_j.size() != d)
    throw InvalidConfigError("per-asset jump parameter size mismatch");
  if (rho_j.rows() != d || rho_j.cols() != d) throw InvalidConfigError("rho_j must be d x d");
  if ((sigma_j.array() < 0.0).any()) throw InvalidConfigError("jump vols must be non-negative");
}

Eigen::MatrixXd PathSet::states_at(int step) const {
  Eigen::MatrixXd out(n_paths, d);
  for (int j = 0; j < n_paths; ++j) out.row(j) = state(j, step);
  return out;
}

void PathSet::write_csv(std::ostream& os) const {
  os << "path";
  for (int i = 0; i <= n; ++i)
    for (int nu = 0; nu < d; ++nu) os << ",t" << i << "_a" << nu;
  os << "\n";
  char buf[32];
  for (int j = 0; j < n_paths; ++j) {
    os << j;
    for (int i = 0; i <= n; ++i)
      for (int nu = 0; nu < d; ++nu) {
        std::snprintf(buf, sizeof buf, "%.17g", at(j, i, nu));
        os << ',' << buf;
      }
    os << "\n";
  }
}

namespace {
constexpr char kPathMagic[8] = {'d', 'k', 'm', 'c', 'p', 't', 'h', '1'};
}

void PathSet::write_binary(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write(kPathMagic, 8);
  std::int64_t hdr[3] = {n_paths, n, d};
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  os.write(reinterpret_cast<const char*>(&seed), sizeof seed);
  os.write(reinterpret_cast<const char*>(times.data()), std::streamsize(sizeof(double)) * times.size());
  os.write(reinterpret_cast<const char*>(values.data()), std::streamsize(sizeof(double)) * values.size());
}

PathSet PathSet::read_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kPathMagic, 8)) throw Error("bad path file header");
  std::int64_t hdr[3];
  is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  PathSet ps;
  ps.n_paths = int(hdr[0]);
  ps.n = int(hdr[1]);
  ps.d = int(hdr[2]);
  is.read(reinterpret_cast<char*>(&ps.seed), sizeof ps.seed);
  ps.times.resize(ps.n + 1);
  is.read(reinterpret_cast<char*>(ps.times.data()), std::streamsize(sizeof(double)) * (ps.n + 1));
  ps.values.resize(std::size_t(ps.n_paths) * (ps.n + 1) * ps.d);
  is.read(reinterpret_cast<char*>(ps.values.data()), std::streamsize(sizeof(double)) * ps.values.size());
  if (!is) throw Error("truncated path file");
  return ps;
}

Eigen::MatrixXd correlation_cholesky(const Eigen::MatrixXd& rho) {
  Eigen::LLT<Eigen::MatrixXd> llt(rho);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double jitter = 1e-10; jitter <= 1e-6 * (1.0 + 1e-12); jitter *= 10.0) {
    Eigen::MatrixXd shifted = rho;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NotPsdError("correlation matrix not positive semi-definite (jitter up to 1e-6 tried)");
}

Eigen::VectorXd exercise_grid(double T, int n) {
  if (n < 1) throw InvalidConfigError("need at least one exercise date");
  if (T <= 0.0) throw InvalidConfigError("maturity must be positive");
  Eigen::VectorXd t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = T * i / n;
  return t;
}

namespace {

// Common driver. Per (path, step) the draw order is fixed: d diffusion
// normals, then (jumps only) one uniform for the Poisson count, then d
// normals per jump. Each (path, step) owns its own counter-based stream,
// so the loop parallelizes without changing results.
PathSet simulate(const GbmParams& p, const MjdParams* jumps, int n_paths, std::uint64_t seed) {
  const int d = p.d, n = p.n;
  PathSet ps;
  ps.n_paths = n_paths;
  ps.n = n;
  ps.d = d;
  ps.seed = seed;
  ps.times = exercise_grid(p.T, n);
  ps.values.resize(std::size_t(n_paths) * (n + 1) * d);

  const Eigen::MatrixXd L = correlation_cholesky(p.rho);
  Eigen::MatrixXd Lj;
  Eigen::VectorXd lambda_kappa = Eigen::VectorXd::Zero(d);
  double lambda = 0.0;
  if (jumps) {
    // chol(D rho_j D) = D chol(rho_j) for the diagonal scaling D = diag(sigma_j)
    Lj = jumps->sigma_j.asDiagonal() * correlation_cholesky(jumps->rho_j);
    lambda = jumps->lambda_j;
    lambda_kappa = lambda * jumps->kappa();
  }

  const Eigen::VectorXd log_s0 = p.s0.array().log();

#pragma omp parallel for schedule(static)
  for (int j = 0; j < n_paths; ++j) {
    Eigen::VectorXd log_s = log_s0;
    Eigen::VectorXd xi(d), corr(d), z(d);
    double* row0 = &ps.values[std::size_t(j) * (n + 1) * d];
    for (int nu = 0; nu < d; ++nu) row0[nu] = p.s0[nu];
    for (int i = 0; i < n; ++i) {
      const double dt = ps.times[i + 1] - ps.times[i];
      const double sqrt_dt = std::sqrt(dt);
      RandomStream rs(seed, std::uint64_t(j), std::uint64_t(i), 0);
      rs.fill_normals(xi);
      corr.noalias() = L * xi;
      for (int nu = 0; nu < d; ++nu) {
        const double drift = (p.r - p.q[nu] - lambda_kappa[nu] - 0.5 * p.sigma[nu] * p.sigma[nu]) * dt;
        log_s[nu] += drift + p.sigma[nu] * sqrt_dt * corr[nu];
      }
      if (jumps) {
        const int count = rs.poisson(lambda * dt);
        for (int k = 0; k < count; ++k) {
          rs.fill_normals(xi);
          z.noalias() = Lj * xi;
          log_s += jumps->mu_j + z;
        }
      }
      double* row = row0 + std::size_t(i + 1) * d;
      for (int nu = 0; nu < d; ++nu) row[nu] = std::exp(log_s[nu]);
    }
  }
  return ps;
}

}  // namespace

PathSet simulate_gbm(const GbmParams& params, int n_paths, std::uint64_t seed) {
  params.validate();
  return simulate(params, nullptr, n_paths, seed);
}

PathSet simulate_mjd(const MjdParams& params, int n_paths, std::uint64_t seed) {
  params.validate();
  return simulate(params.base, &params, n_paths, seed);
}

}  // namespace dkmc
