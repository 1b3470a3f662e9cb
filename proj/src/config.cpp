#include "dkmc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dkmc {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidConfigError("bad boolean for " + key + ": " + v);
}

std::vector<int> parse_dims(const std::string& v) {
  std::vector<int> out;
  std::string tok;
  std::stringstream ss(v);
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& id) {
  ExperimentConfig cfg;
  cfg.config_id = id;

  std::map<std::string, std::string> kv;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidConfigError("bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidConfigError("expected key = value at line " + std::to_string(lineno));
    const std::string key = section + "." + trim(line.substr(0, eq));
    kv[key] = trim(line.substr(eq + 1));
  }

  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto set_d = [&](const char* key, double& dst) {
    const std::string v = take(key);
    if (!v.empty()) dst = std::stod(v);
  };
  auto set_i = [&](const char* key, int& dst) {
    const std::string v = take(key);
    if (!v.empty()) dst = std::stoi(v);
  };
  auto set_s = [&](const char* key, std::string& dst) {
    const std::string v = take(key);
    if (!v.empty()) dst = v;
  };
  auto set_b = [&](const char* key, bool& dst) {
    const std::string v = take(key);
    if (!v.empty()) dst = parse_bool(v, key);
  };

  set_s("model.kind", cfg.model_kind);
  set_i("model.d", cfg.d);
  set_d("model.s0", cfg.s0);
  set_d("model.r", cfg.r);
  set_d("model.q", cfg.q);
  set_d("model.sigma", cfg.sigma);
  set_d("model.rho", cfg.rho);
  set_s("model.rho_mode", cfg.rho_mode);
  set_d("model.T", cfg.T);
  set_i("model.n", cfg.n);
  set_d("model.lambda_j", cfg.lambda_j);
  set_d("model.mu_j", cfg.mu_j);
  set_d("model.sigma_j", cfg.sigma_j);
  set_d("model.rho_j", cfg.rho_j);
  set_s("model.rho_j_mode", cfg.rho_j_mode);
  set_s("model.kappa_form", cfg.kappa_form);

  set_s("payoff.kind", cfg.payoff_kind);
  set_d("payoff.strike", cfg.strike);

  set_s("method.name", cfg.method);
  set_i("method.inducing", cfg.inducing);
  set_i("method.iterations", cfg.iterations);
  set_d("method.lr", cfg.lr);
  set_d("method.momentum", cfg.momentum);
  set_d("method.weight_decay", cfg.weight_decay);
  {
    const std::string v = take("method.extractor");
    if (!v.empty()) cfg.extractor = parse_dims(v);
  }
  set_i("method.latent_dim", cfg.latent_dim);
  set_d("method.gamma_init", cfg.gamma_init);
  set_d("method.sigma_init", cfg.sigma_init);
  set_d("method.lchol_init", cfg.lchol_init);
  set_s("method.precision", cfg.precision);
  set_i("method.lsm_degree", cfg.lsm_degree);
  set_b("method.lsm_cross_terms", cfg.lsm_cross_terms);
  set_i("method.gpr_path_cap", cfg.gpr_path_cap);
  set_i("method.gpr_iterations", cfg.gpr_iterations);

  set_b("flags.itm_filter", cfg.itm_filter);
  set_b("flags.output_scale", cfg.output_scale);
  set_b("flags.y_standardize", cfg.y_standardize);

  set_i("run.batches", cfg.batches);
  set_i("run.paths", cfg.paths);
  {
    const std::string v = take("run.master_seed");
    if (!v.empty()) cfg.master_seed = std::stoull(v);
  }
  set_i("run.workers", cfg.workers);

  if (!kv.empty()) throw InvalidConfigError("unknown config key: " + kv.begin()->first);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  std::string stem = path;
  const auto slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return parse_config_text(buf.str(), stem);
}

void ExperimentConfig::validate() const {
  if (model_kind != "gbm" && model_kind != "mjd")
    throw InvalidConfigError("model.kind must be gbm or mjd");
  if (payoff_kind != "max_call" && payoff_kind != "geo_basket_put")
    throw InvalidConfigError("payoff.kind must be max_call or geo_basket_put");
  if (method != "lsm" && method != "gpr" && method != "dkl" && method != "dkl40" &&
      method != "dkl200")
    throw InvalidConfigError("method.name must be lsm, gpr, dkl, dkl40 or dkl200");
  if (rho_mode != "fixed" && rho_mode != "geo_invariant")
    throw InvalidConfigError("model.rho_mode must be fixed or geo_invariant");
  if (rho_j_mode != "fixed" && rho_j_mode != "geo_invariant")
    throw InvalidConfigError("model.rho_j_mode must be fixed or geo_invariant");
  if (kappa_form != "variance" && kappa_form != "literal")
    throw InvalidConfigError("model.kappa_form must be variance or literal");
  if (precision != "float32" && precision != "float64")
    throw InvalidConfigError("method.precision must be float32 or float64");
  if (d < 1) throw InvalidConfigError("model.d must be >= 1");
  if (n < 1) throw InvalidConfigError("model.n must be >= 1");
  if (T <= 0) throw InvalidConfigError("model.T must be > 0");
  if (s0 <= 0) throw InvalidConfigError("model.s0 must be > 0");
  if (strike <= 0) throw InvalidConfigError("payoff.strike must be > 0");
  if (batches < 1) throw InvalidConfigError("run.batches must be >= 1");
  if (paths < 1) throw InvalidConfigError("run.paths must be >= 1");
  if (inducing < 1) throw InvalidConfigError("method.inducing must be >= 1");
  if (iterations < 1) throw InvalidConfigError("method.iterations must be >= 1");
  if (latent_dim < 1) throw InvalidConfigError("method.latent_dim must be >= 1");
  if (paths < inducing && (method == "dkl" || method == "dkl40" || method == "dkl200"))
    throw InvalidConfigError("run.paths must be >= method.inducing for dkl");
}

double ExperimentConfig::effective_rho() const {
  if (rho_mode == "geo_invariant") return d > 1 ? ((4.0 / 9.0) * d - 1.0) / (d - 1.0) : 0.0;
  return rho;
}

double ExperimentConfig::effective_rho_j() const {
  if (rho_j_mode == "geo_invariant") return d > 1 ? ((4.0 / 9.0) * d - 1.0) / (d - 1.0) : 0.0;
  return rho_j;
}

GbmParams ExperimentConfig::gbm_params() const {
  return GbmParams::equal(d, s0, r, q, sigma, effective_rho(), T, n);
}

MjdParams ExperimentConfig::mjd_params() const {
  MjdParams p;
  p.base = GbmParams::equal(d, s0, r, q, sigma, effective_rho(), T, n);
  p.lambda_j = lambda_j;
  p.mu_j = Eigen::VectorXd::Constant(d, mu_j);
  p.sigma_j = Eigen::VectorXd::Constant(d, sigma_j);
  p.rho_j = Eigen::MatrixXd::Constant(d, d, effective_rho_j());
  p.rho_j.diagonal().setOnes();
  p.kappa_form = kappa_form == "variance" ? KappaForm::Variance : KappaForm::Literal;
  return p;
}

PayoffSpec ExperimentConfig::payoff() const {
  return {payoff_kind == "max_call" ? PayoffKind::MaxCall : PayoffKind::GeoBasketPut, strike};
}

RegressorKind ExperimentConfig::regressor() const {
  if (method == "lsm") return LsmPolySpec{lsm_degree, lsm_cross_terms};
  if (method == "gpr") {
    ExactGprSpec g;
    g.path_cap = gpr_path_cap;
    g.opt_iterations = gpr_iterations;
    g.lr = lr;
    g.momentum = momentum;
    return g;
  }
  DklSpec spec;
  spec.config.hidden_dims = extractor;
  spec.config.latent_dim = latent_dim;
  spec.config.inducing = method == "dkl40" ? 40 : method == "dkl200" ? 200 : inducing;
  spec.config.iterations = iterations;
  spec.config.sgd = {lr, momentum, weight_decay};
  spec.config.gamma_init = gamma_init;
  spec.config.sigma_init = sigma_init;
  spec.config.lchol_init = lchol_init;
  spec.config.output_scale = output_scale;
  spec.config.standardize_targets = y_standardize;
  spec.config.train_float64 = precision == "float64";
  return spec;
}

BatchJob ExperimentConfig::to_job() const {
  BatchJob job;
  if (model_kind == "gbm")
    job.model = gbm_params();
  else
    job.model = mjd_params();
  job.payoff = payoff();
  job.regressor = regressor();
  job.batches = batches;
  job.paths = paths;
  job.master_seed = master_seed;
  job.itm_filter = itm_filter;
  job.workers = std::max(1, workers);
  return job;
}

}  // namespace dkmc
