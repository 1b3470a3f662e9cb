#include "dkmc/bench.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "dkmc/benchmarks.hpp"

namespace dkmc {

int resolve_workers(int cli_value, int batches) {
  int w = cli_value;
  if (w <= 0) {
    if (const char* env = std::getenv("DKMC_WORKERS")) w = std::atoi(env);
  }
  if (w <= 0) w = int(std::thread::hardware_concurrency());
  if (w <= 0) w = 1;
  return std::min(w, std::max(1, batches));
}

ReportRow run_experiment(const ExperimentConfig& cfg, const std::string& report_path) {
  cfg.validate();
  BatchJob job = cfg.to_job();
  job.workers = resolve_workers(cfg.workers, cfg.batches);
  const PriceEstimate est = price_batches(job);

  ReportRow row;
  row.config_id = cfg.config_id;
  row.model = cfg.model_kind;
  row.method = cfg.method;
  row.d = cfg.d;
  row.s0 = cfg.s0;
  row.paths = cfg.paths;
  row.batches = cfg.batches;
  row.seed = cfg.master_seed;
  row.price = est.price;
  row.std_dev = est.std_dev;
  row.benchmark = benchmark_price(cfg.model_kind, cfg.d, cfg.s0);
  if (row.benchmark)
    row.rel_error_pct = 100.0 * std::abs(est.price - *row.benchmark) / *row.benchmark;
  row.wall_time_s = est.wall_time_s;

  if (!report_path.empty()) {
    const bool fresh = !std::filesystem::exists(report_path);
    std::ofstream os(report_path, std::ios::app);
    if (!os) throw Error("cannot open report file " + report_path);
    if (fresh) write_report_header(os);
    append_report_row(os, row);

    const std::string batches_path = report_path + ".batches.csv";
    const bool fresh_b = !std::filesystem::exists(batches_path);
    std::ofstream bs(batches_path, std::ios::app);
    write_batch_prices(bs, cfg.config_id, est.per_batch, fresh_b);
  }
  return row;
}

namespace {

ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis,
                            const std::string& value) {
  ExperimentConfig cfg = base;
  const bool is_dkl = base.method == "dkl" || base.method == "dkl40" || base.method == "dkl200";
  if (axis == "inducing_points") {
    if (!is_dkl) throw InvalidAxisError("inducing_points applies only to dkl methods");
    cfg.method = "dkl";
    cfg.inducing = std::stoi(value);
  } else if (axis == "iterations") {
    if (!is_dkl) throw InvalidAxisError("iterations applies only to dkl methods");
    cfg.iterations = std::stoi(value);
  } else if (axis == "extractor") {
    if (!is_dkl) throw InvalidAxisError("extractor applies only to dkl methods");
    std::vector<int> dims;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, '-'))
      if (!tok.empty()) dims.push_back(std::stoi(tok));
    if (dims.size() < 2) throw InvalidAxisError("extractor value needs hidden and latent dims");
    cfg.latent_dim = dims.back();
    dims.pop_back();
    cfg.extractor = dims;
  } else if (axis == "s0") {
    cfg.s0 = std::stod(value);
  } else if (axis == "rho") {
    cfg.rho = std::stod(value);
    cfg.rho_mode = "fixed";
  } else if (axis == "sigma") {
    cfg.sigma = std::stod(value);
  } else if (axis == "r") {
    cfg.r = std::stod(value);
  } else {
    throw InvalidAxisError("unknown sweep axis: " + axis);
  }
  cfg.config_id = base.config_id + "_" + axis + "_" + value;
  return cfg;
}

}  // namespace

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::string& axis,
                                  const std::vector<std::string>& values,
                                  const std::string& out_csv) {
  base.validate();
  std::vector<SweepPoint> points;
  for (const std::string& v : values) {
    const ExperimentConfig cfg = apply_axis(base, axis, v);
    const ReportRow row = run_experiment(cfg, "");
    SweepPoint p;
    p.value = v;
    p.price = row.price;
    p.rel_error_pct = row.rel_error_pct;
    p.wall_time_s = row.wall_time_s;
    points.push_back(std::move(p));
  }
  if (!out_csv.empty()) {
    std::ofstream os(out_csv);
    if (!os) throw Error("cannot open sweep output " + out_csv);
    write_sweep_csv(os, points);
  }
  return points;
}

}  // namespace dkmc
