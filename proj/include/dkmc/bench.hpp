#pragma once

#include <string>
#include <vector>

#include "dkmc/config.hpp"
#include "dkmc/report.hpp"

namespace dkmc {

/// Prices one configuration, appends to the report CSV (creating it with a
/// header if absent) and logs per-batch prices to `<report>.batches.csv`.
/// Pass an empty report path to skip file output.
ReportRow run_experiment(const ExperimentConfig& cfg, const std::string& report_path);

/// One pricing run per axis value; emits the plot-ready sweep CSV. Supported
/// axes: inducing_points, iterations, extractor (dkl methods only) and
/// s0, rho, sigma, r (any method). Throws InvalidAxisError otherwise.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const std::string& axis,
                                  const std::vector<std::string>& values,
                                  const std::string& out_csv);

/// Default worker count: DKMC_WORKERS env var if set, else the hardware
/// concurrency, capped by the batch count.
int resolve_workers(int cli_value, int batches);

}  // namespace dkmc
