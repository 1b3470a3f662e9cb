#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dkmc/pricer.hpp"

namespace dkmc {

/// One experiment: model + payoff + regression method + run protocol.
/// Mirrors the flat key = value config files (see configs/).
struct ExperimentConfig {
  std::string config_id = "adhoc";

  // [model]
  std::string model_kind = "gbm";  // gbm | mjd
  int d = 2;
  double s0 = 100.0;
  double r = 0.05;
  double q = 0.1;
  double sigma = 0.2;
  double rho = 0.0;
  std::string rho_mode = "fixed";  // fixed | geo_invariant: rho = (4d/9 - 1)/(d-1)
  double T = 3.0;
  int n = 9;
  double lambda_j = 0.0;
  double mu_j = 0.0;
  double sigma_j = 0.0;
  double rho_j = 0.0;
  std::string rho_j_mode = "fixed";
  std::string kappa_form = "variance";  // variance | literal

  // [payoff]
  std::string payoff_kind = "max_call";  // max_call | geo_basket_put
  double strike = 100.0;

  // [method]
  std::string method = "lsm";  // lsm | gpr | dkl | dkl40 | dkl200
  int inducing = 40;
  int iterations = 1500;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-8;
  std::vector<int> extractor = {1000, 500, 50};  // hidden widths; latent_dim appended
  int latent_dim = 2;
  double gamma_init = 1.0;
  double sigma_init = 0.1;
  double lchol_init = 0.1;
  std::string precision = "float32";  // float32 | float64
  int lsm_degree = 2;
  bool lsm_cross_terms = true;
  int gpr_path_cap = 2000;
  int gpr_iterations = 20;

  // [flags]
  bool itm_filter = false;
  bool output_scale = false;
  bool y_standardize = false;

  // [run]
  int batches = 10;
  int paths = 10000;
  std::uint64_t master_seed = 20240901;
  int workers = 0;  // 0 = CLI/env/default policy decides

  void validate() const;  // throws InvalidConfigError
  double effective_rho() const;
  double effective_rho_j() const;
  GbmParams gbm_params() const;
  MjdParams mjd_params() const;
  PayoffSpec payoff() const;
  RegressorKind regressor() const;
  BatchJob to_job() const;
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& id);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace dkmc
