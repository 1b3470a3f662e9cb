#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dkmc/bench.hpp"
#include "dkmc/oracles.hpp"
#include "dkmc/pricer.hpp"
#include "dkmc/rng.hpp"
#include "dkmc/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitOracle = 3;

struct Overrides {
  std::string method;
  int dims = 0;
  double s0 = 0.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int batches = 0;
  int paths = 0;
  int workers = 0;
  bool itm_filter = false;
};

dkmc::ExperimentConfig load_with_overrides(const std::string& config_path, const Overrides& ov) {
  dkmc::ExperimentConfig cfg = dkmc::load_config_file(config_path);
  if (!ov.method.empty()) cfg.method = ov.method;
  if (ov.dims > 0) cfg.d = ov.dims;
  if (ov.s0 > 0.0) cfg.s0 = ov.s0;
  if (ov.seed_set) cfg.master_seed = ov.seed;
  if (ov.batches > 0) cfg.batches = ov.batches;
  if (ov.paths > 0) cfg.paths = ov.paths;
  if (ov.workers > 0) cfg.workers = ov.workers;
  if (ov.itm_filter) cfg.itm_filter = true;
  cfg.validate();
  return cfg;
}

int cmd_price(const std::string& config_path, const Overrides& ov, const std::string& out) {
  const dkmc::ExperimentConfig cfg = load_with_overrides(config_path, ov);
  const dkmc::ReportRow row = dkmc::run_experiment(cfg, out);
  std::printf("%s %s d=%d s0=%.2f: price=%.4f std=%.4f", cfg.config_id.c_str(),
              cfg.method.c_str(), cfg.d, cfg.s0, row.price, row.std_dev);
  if (row.benchmark)
    std::printf(" benchmark=%.4f rel_error=%.3f%%", *row.benchmark, *row.rel_error_pct);
  std::printf(" time=%.1fs\n", row.wall_time_s);
  if (!out.empty()) std::printf("report appended to %s\n", out.c_str());
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const Overrides& ov, const std::string& axis,
              const std::string& values_csv, const std::string& out) {
  const dkmc::ExperimentConfig cfg = load_with_overrides(config_path, ov);
  std::vector<std::string> values;
  std::stringstream ss(values_csv);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) values.push_back(tok);
  const auto points = dkmc::run_sweep(cfg, axis, values, out);
  for (const auto& p : points) {
    std::printf("%s=%s price=%.4f", axis.c_str(), p.value.c_str(), p.price);
    if (p.rel_error_pct) std::printf(" error=%.3f%%", *p.rel_error_pct);
    std::printf(" time=%.1fs\n", p.wall_time_s);
  }
  std::printf("sweep written to %s (%zu rows)\n", out.c_str(), points.size());
  return kExitOk;
}

int cmd_surface(const std::string& config_path, const Overrides& ov, const std::string& out,
                int grid_points) {
  dkmc::ExperimentConfig cfg = load_with_overrides(config_path, ov);
  if (cfg.d != 2)
    throw dkmc::UnsupportedDimensionError("surface requires a 2-asset configuration");
  const std::uint64_t batch_seed = dkmc::mix_seed(cfg.master_seed, 0);
  dkmc::PathSet paths =
      cfg.model_kind == "gbm"
          ? dkmc::simulate_gbm(cfg.gbm_params(), cfg.paths, batch_seed)
          : dkmc::simulate_mjd(cfg.mjd_params(), cfg.paths, batch_seed);
  dkmc::LsOptions opts;
  opts.itm_filter = cfg.itm_filter;
  opts.keep_first_regressor = true;
  const dkmc::LsResult res = dkmc::longstaff_schwartz(paths, cfg.payoff(),
                                                      cfg.r, cfg.regressor(), batch_seed, opts);
  if (!res.first_regressor) throw dkmc::Error("no regressor was trained (n < 2?)");
  const dkmc::SurfaceResult surf = dkmc::continuation_surface(
      *res.first_regressor, res.first_discount, 30.0, 180.0, grid_points);
  std::ofstream os(out);
  if (!os) throw dkmc::Error("cannot open " + out);
  dkmc::write_surface_csv(surf, os);
  std::printf("surface written to %s (%d x %d grid), batch price %.4f\n", out.c_str(),
              surf.grid_points, surf.grid_points, res.price);
  std::printf("monotonicity violations along s1: top slice %d, all slices %d\n",
              surf.slice_violations, surf.total_violations);
  return kExitOk;
}

int cmd_verify(std::uint64_t seed) {
  const dkmc::OracleReport rep = dkmc::run_oracle_suite(seed, &std::cout);
  if (rep.all_passed()) {
    std::printf("oracle suite: all %zu checks passed\n", rep.checks.size());
    return kExitOk;
  }
  int failed = 0;
  for (const auto& c : rep.checks) failed += c.passed ? 0 : 1;
  std::printf("oracle suite: %d of %zu checks FAILED\n", failed, rep.checks.size());
  return kExitOracle;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regression Monte Carlo pricer for Bermudan options: polynomial, exact-GP "
               "and deep-kernel sparse-variational-GP continuation regressors"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path, out_path, axis, values_csv;
  int grid_points = 76;
  std::uint64_t verify_seed = 20240901;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    if (need_config)
      sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--method", ov.method, "override method: lsm|gpr|dkl|dkl40|dkl200");
    sub->add_option("--dims", ov.dims, "override asset count");
    sub->add_option("--s0", ov.s0, "override initial price");
    sub->add_option("--seed", ov.seed, "override master seed")
        ->each([&](const std::string&) { ov.seed_set = true; });
    sub->add_option("--batches", ov.batches, "override batch count");
    sub->add_option("--paths", ov.paths, "override paths per batch");
    sub->add_option("--workers", ov.workers,
                    "batch worker pool size (default: DKMC_WORKERS env or hardware cores)");
    sub->add_flag("--itm-filter", ov.itm_filter, "train regressors on in-the-money paths only");
  };

  CLI::App* price = app.add_subcommand("price", "price one configuration over batches");
  add_common(price, true);
  price->add_option("--out", out_path, "append a row to this report CSV");

  CLI::App* sweep = app.add_subcommand("sweep", "price along one hyperparameter axis");
  add_common(sweep, true);
  sweep->add_option("--axis", axis, "inducing_points|iterations|extractor|s0|rho|sigma|r")
      ->required();
  sweep->add_option("--values", values_csv, "comma-separated axis values")->required();
  sweep->add_option("--out", out_path, "sweep CSV path")->required();

  CLI::App* surface = app.add_subcommand(
      "surface", "dump the discounted continuation surface at the last regression date (d=2)");
  add_common(surface, true);
  surface->add_option("--out", out_path, "surface CSV path")->required();
  surface->add_option("--grid-points", grid_points, "points per axis over [30,180]");

  CLI::App* verify = app.add_subcommand("verify", "run the oracle verification suite");
  verify->add_option("--seed", verify_seed, "master seed for the suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (price->parsed()) return cmd_price(config_path, ov, out_path);
    if (sweep->parsed()) return cmd_sweep(config_path, ov, axis, values_csv, out_path);
    if (surface->parsed()) return cmd_surface(config_path, ov, out_path, grid_points);
    if (verify->parsed()) return cmd_verify(verify_seed);
  } catch (const dkmc::InvalidConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const dkmc::InvalidAxisError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const dkmc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitOk;
}
