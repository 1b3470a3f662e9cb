#include "dkmc/pricer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "dkmc/gp.hpp"
#include "dkmc/rng.hpp"

namespace dkmc {

namespace {

class LsmRegressor final : public ContinuationRegressor {
 public:
  explicit LsmRegressor(LsmPolySpec spec) : spec_(spec) {}
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t) override {
    PolyBasis basis{int(X.cols()), spec_.degree, spec_.cross_terms};
    reg_ = lsm_fit(X, y, basis);
    dim_ = int(X.cols());
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return lsm_predict_batch(reg_, X);
  }
  int input_dim() const override { return dim_; }

 private:
  LsmPolySpec spec_;
  PolyRegressor reg_;
  int dim_ = 0;
};

class GprRegressor final : public ContinuationRegressor {
 public:
  explicit GprRegressor(ExactGprSpec spec) : spec_(spec) {}

  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t) override {
    dim_ = int(X.cols());
    // deterministic strided subsample when capped
    if (spec_.path_cap > 0 && X.rows() > spec_.path_cap) {
      const int cap = spec_.path_cap;
      model_.X.resize(cap, X.cols());
      model_.y.resize(cap);
      const double stride = double(X.rows()) / cap;
      for (int i = 0; i < cap; ++i) {
        const int r = int(i * stride);
        model_.X.row(i) = X.row(r);
        model_.y[i] = y[r];
      }
    } else {
      model_.X = X;
      model_.y = y;
    }
    // inputs are asset prices; scale the init length-scale to the data spread
    const double spread = std::max(1e-8, std::sqrt((model_.X.rowwise() - model_.X.colwise().mean())
                                                       .rowwise()
                                                       .squaredNorm()
                                                       .mean()));
    const double y_sd = std::max(1e-8, std::sqrt((model_.y.array() - model_.y.mean()).square().mean()));
    model_.kernel.gamma = spec_.gamma_init * spread;
    model_.sigma = spec_.sigma_init * y_sd;
    if (!spec_.fixed_hyperparameters && spec_.opt_iterations > 0) optimize_hyperparameters();
    precompute();
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    const int block = 2048;
    Eigen::VectorXd out(X.rows());
    for (int s = 0; s < X.rows(); s += block) {
      const int len = std::min<int>(block, int(X.rows()) - s);
      out.segment(s, len) = kernel_matrix(model_.kernel, X.middleRows(s, len), model_.X) * alpha_;
    }
    return out;
  }
  int input_dim() const override { return dim_; }

 private:
  void optimize_hyperparameters() {
    using S = double;
    const int n = int(model_.y.size());
    auto sp_inv = [](double v) { return std::log(std::expm1(v)); };
    ad::Mat<S> ug = ad::Mat<S>::Constant(1, 1, sp_inv(model_.kernel.gamma));
    ad::Mat<S> us = ad::Mat<S>::Constant(1, 1, sp_inv(model_.sigma));
    Sgd<S> opt({spec_.lr, spec_.momentum, 0.0});
    for (int it = 0; it < spec_.opt_iterations; ++it) {
      ad::Tape<S> tape;
      auto ugv = tape.leaf(ug), usv = tape.leaf(us);
      auto gamma = ad::softplus(ugv);
      auto sigma = ad::softplus(usv);
      auto kv = graph::kernel_vars(tape, gamma, ad::Var<S>{});
      auto Xv = tape.constant(model_.X);
      auto logml = graph::gpr_log_marginal_graph(tape, kv, ad::mul(sigma, sigma), Xv,
                                                 ad::Mat<S>(model_.y));
      auto loss = ad::scale(logml, S(-1.0 / n));
      if (!std::isfinite(loss.scalar())) break;
      tape.backward(loss);
      std::vector<ad::Mat<S>> grads{tape.grad_of(ugv), tape.grad_of(usv)};
      opt.step({&ug, &us}, grads);
    }
    auto sp = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };
    model_.kernel.gamma = sp(ug(0, 0));
    model_.sigma = sp(us(0, 0));
  }

  void precompute() {
    Eigen::MatrixXd k = kernel_matrix(model_.kernel, model_.X, model_.X);
    k.diagonal().array() += model_.sigma * model_.sigma;
    const double eps = choose_spd_jitter(k, 1e-6, 1e-4, true);
    if (eps > 0.0) k.diagonal().array() += eps;
    alpha_ = Eigen::LLT<Eigen::MatrixXd>(k).solve(model_.y);
  }

  ExactGprSpec spec_;
  ExactGpModel model_;
  Eigen::VectorXd alpha_;
  int dim_ = 0;
};

class DklRegressor final : public ContinuationRegressor {
 public:
  explicit DklRegressor(DklSpec spec) : spec_(std::move(spec)) {}
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::uint64_t seed) override {
    model_ = train_dkl(X, y, spec_.config, seed);
    dim_ = int(X.cols());
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return model_.predict_batch(X);
  }
  int input_dim() const override { return dim_; }

 private:
  DklSpec spec_;
  DeepKernelModel model_;
  int dim_ = 0;
};

}  // namespace

std::unique_ptr<ContinuationRegressor> make_regressor(const RegressorKind& kind) {
  return std::visit(
      [](const auto& spec) -> std::unique_ptr<ContinuationRegressor> {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, LsmPolySpec>) return std::make_unique<LsmRegressor>(spec);
        if constexpr (std::is_same_v<T, ExactGprSpec>) return std::make_unique<GprRegressor>(spec);
        if constexpr (std::is_same_v<T, DklSpec>) return std::make_unique<DklRegressor>(spec);
      },
      kind);
}

LsResult longstaff_schwartz(const PathSet& paths, const PayoffSpec& payoff, double r,
                            const RegressorKind& regressor, std::uint64_t seed,
                            const LsOptions& options) {
  const int n = paths.n, N = paths.n_paths;
  if (N < 1) throw EmptyPathsError("longstaff_schwartz: no paths");

  Eigen::VectorXd V(N);
  for (int j = 0; j < N; ++j) V[j] = evaluate(payoff, paths.state(j, n));

  LsResult result;
  for (int i = n - 1; i >= 1; --i) {
    const double D = discount(r, paths.times[i], paths.times[i + 1]);
    const Eigen::MatrixXd X = paths.states_at(i);
    Eigen::VectorXd h(N);
    for (int j = 0; j < N; ++j) h[j] = evaluate(payoff, X.row(j));

    auto reg = make_regressor(regressor);
    const std::uint64_t step_seed = mix_seed(seed, 0x11F1000ULL + std::uint64_t(i));
    bool fitted = false;
    if (options.itm_filter) {
      std::vector<int> itm;
      for (int j = 0; j < N; ++j)
        if (h[j] > 0.0) itm.push_back(j);
      if (!itm.empty()) {
        Eigen::MatrixXd Xf(itm.size(), X.cols());
        Eigen::VectorXd yf(itm.size());
        for (std::size_t k = 0; k < itm.size(); ++k) {
          Xf.row(int(k)) = X.row(itm[k]);
          yf[int(k)] = V[itm[k]];
        }
        reg->fit(Xf, yf, step_seed);
        fitted = true;
      }
    } else {
      reg->fit(X, V, step_seed);
      fitted = true;
    }

    if (fitted) {
      const Eigen::VectorXd pred = reg->predict(X);
      for (int j = 0; j < N; ++j) {
        if (h[j] > 0.0 && h[j] > D * pred[j])
          V[j] = h[j];
        else
          V[j] *= D;
      }
    } else {
      V *= D;
    }

    if (i == n - 1 && options.keep_first_regressor && fitted) {
      result.first_regressor = std::move(reg);
      result.first_discount = D;
    }
  }

  result.price = discount(r, paths.times[0], paths.times[1]) * V.mean();
  return result;
}

double european_mc_price(const PathSet& paths, const PayoffSpec& payoff, double r) {
  const int N = paths.n_paths;
  if (N < 1) throw EmptyPathsError("european_mc_price: no paths");
  Eigen::VectorXd V(N);
  for (int j = 0; j < N; ++j) V[j] = evaluate(payoff, paths.state(j, paths.n));
  return discount(r, paths.times[0], paths.times[paths.n]) * V.mean();
}

namespace {

double run_one_batch(const BatchJob& job, int batch_index) {
  const std::uint64_t batch_seed = mix_seed(job.master_seed, std::uint64_t(batch_index));
  PathSet paths = std::holds_alternative<GbmParams>(job.model)
                      ? simulate_gbm(std::get<GbmParams>(job.model), job.paths, batch_seed)
                      : simulate_mjd(std::get<MjdParams>(job.model), job.paths, batch_seed);
  double r = std::holds_alternative<GbmParams>(job.model) ? std::get<GbmParams>(job.model).r
                                                          : std::get<MjdParams>(job.model).base.r;
  LsOptions opt;
  opt.itm_filter = job.itm_filter;
  return longstaff_schwartz(paths, job.payoff, r, job.regressor, batch_seed, opt).price;
}

}  // namespace

PriceEstimate price_batches(const BatchJob& job) {
  if (job.batches < 1) throw InvalidConfigError("need at least one batch");
  if (job.paths < 1) throw InvalidConfigError("need at least one path");
  const auto t0 = std::chrono::steady_clock::now();

  PriceEstimate est;
  est.per_batch.resize(job.batches);
  const int workers = std::max(1, std::min(job.workers, job.batches));
  if (workers == 1) {
    for (int b = 0; b < job.batches; ++b) est.per_batch[b] = run_one_batch(job, b);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < job.batches; b = next.fetch_add(1))
          est.per_batch[b] = run_one_batch(job, b);
      });
    for (auto& th : pool) th.join();
  }

  const int B = job.batches;
  est.price = 0.0;
  for (double p : est.per_batch) est.price += p;
  est.price /= B;
  if (B > 1) {
    double ss = 0.0;
    for (double p : est.per_batch) ss += (p - est.price) * (p - est.price);
    est.std_dev = std::sqrt(ss / (B - 1));
  } else {
    est.std_dev = 0.0;
    est.single_batch = true;
  }
  est.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return est;
}

SurfaceResult continuation_surface(const ContinuationRegressor& reg, double discount_factor,
                                   double lo, double hi, int points) {
  if (reg.input_dim() != 2)
    throw UnsupportedDimensionError("continuation surface requires a 2-asset regressor");
  if (points < 2) throw InvalidConfigError("surface grid needs at least 2 points per axis");

  SurfaceResult out;
  out.grid_points = points;
  Eigen::VectorXd axis(points);
  for (int i = 0; i < points; ++i) axis[i] = lo + (hi - lo) * i / (points - 1);

  Eigen::MatrixXd grid(points * points, 2);
  int k = 0;
  for (int a = 0; a < points; ++a)
    for (int b = 0; b < points; ++b) grid.row(k++) << axis[a], axis[b];
  const Eigen::VectorXd v = discount_factor * reg.predict(grid);

  out.s1.resize(v.size());
  out.s2.resize(v.size());
  out.value.resize(v.size());
  for (int i = 0; i < v.size(); ++i) {
    out.s1[i] = grid(i, 0);
    out.s2[i] = grid(i, 1);
    out.value[i] = v[i];
  }
  // violations of "C(s1, c) increasing in s1" per fixed-s2 slice
  for (int b = 0; b < points; ++b) {
    int count = 0;
    for (int a = 1; a < points; ++a) {
      if (v[a * points + b] < v[(a - 1) * points + b]) ++count;
    }
    out.total_violations += count;
    if (b == points - 1) out.slice_violations = count;
  }
  return out;
}

void write_surface_csv(const SurfaceResult& s, std::ostream& os) {
  os << "s1,s2,value\n";
  char buf[96];
  for (std::size_t i = 0; i < s.value.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.10g", s.s1[i], s.s2[i], s.value[i]);
    os << buf << "\n";
  }
}

}  // namespace dkmc
