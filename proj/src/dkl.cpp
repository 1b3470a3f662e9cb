#include "dkmc/dkl.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace dkmc {

namespace {

double softplus_inv(double y) { return std::log(std::expm1(y)); }

template <class S>
DeepKernelModel train_impl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_raw,
                           const DklConfig& cfg, std::uint64_t seed,
                           std::vector<double>* history) {
  using M = ad::Mat<S>;
  const int n = int(X.rows());
  const int d = int(X.cols());
  if (n < 1 || y_raw.size() != n) throw ShapeMismatchError("train_dkl: |X| != |y|");
  if (n < cfg.inducing) throw InvalidConfigError("train_dkl: need at least M training points");
  if (!y_raw.allFinite()) throw InvalidConfigError("train_dkl: non-finite targets");

  double y_shift = 0.0, y_scale = 1.0;
  Eigen::VectorXd y = y_raw;
  if (cfg.standardize_targets) {
    y_shift = y.mean();
    const double sd = std::sqrt((y.array() - y_shift).square().sum() / std::max(1, n - 1));
    y_scale = sd > 0.0 ? sd : 1.0;
    y = (y.array() - y_shift) / y_scale;
  }

  const std::vector<int> dims = cfg.full_dims(d);
  RandomStream winit(seed, 1, 0, 0);
  FeatureExtractor extractor = init_extractor(dims, winit);

  RandomStream zinit(seed, 2, 0, 0);
  Eigen::MatrixXd z0(cfg.inducing, cfg.latent_dim);
  for (int i = 0; i < z0.rows(); ++i)
    for (int j = 0; j < z0.cols(); ++j) z0(i, j) = zinit.normal();

  // training copies of all parameters in the training precision
  std::vector<M> Ws, bs;
  for (int j = 0; j < extractor.layers(); ++j) {
    Ws.push_back(extractor.W[j].template cast<S>());
    bs.push_back(extractor.b[j].template cast<S>());
  }
  M Z = z0.template cast<S>();
  M m = M::Zero(cfg.inducing, 1);
  M L_raw = M::Zero(cfg.inducing, cfg.inducing);
  L_raw.diagonal().array() = S(softplus_inv(cfg.lchol_init));
  M u_gamma = M::Constant(1, 1, S(softplus_inv(cfg.gamma_init)));
  M u_sigma = M::Constant(1, 1, S(softplus_inv(cfg.sigma_init)));
  M u_oscale = M::Constant(1, 1, S(softplus_inv(1.0)));

  const M Xs = X.template cast<S>();
  const M ys = y.template cast<S>();

  std::vector<M*> params;
  for (auto& w : Ws) params.push_back(&w);
  for (auto& b : bs) params.push_back(&b);
  params.push_back(&Z);
  params.push_back(&m);
  params.push_back(&L_raw);
  params.push_back(&u_gamma);
  params.push_back(&u_sigma);
  if (cfg.output_scale) params.push_back(&u_oscale);

  Sgd<S> opt(cfg.sgd);
  if (history) history->clear();

  for (int it = 0; it < cfg.iterations; ++it) {
    ad::Tape<S> tape;
    std::vector<ad::Var<S>> Wv, bv;
    for (auto& w : Ws) Wv.push_back(tape.leaf(w));
    for (auto& b : bs) bv.push_back(tape.leaf(b));
    ad::Var<S> Zv = tape.leaf(Z);
    ad::Var<S> mv = tape.leaf(m);
    ad::Var<S> Lrawv = tape.leaf(L_raw);
    ad::Var<S> ugv = tape.leaf(u_gamma);
    ad::Var<S> usv = tape.leaf(u_sigma);
    ad::Var<S> uov = cfg.output_scale ? tape.leaf(u_oscale) : ad::Var<S>{};

    ad::Var<S> Xv = tape.constant(Xs);
    ad::Var<S> latent = graph::mlp_forward(tape, Wv, bv, Xv);
    ad::Var<S> G = graph::rescale(tape, latent);

    graph::SvgpCoreVars<S> core;
    core.Z = Zv;
    core.m = mv;
    ad::Var<S> ldiag = ad::softplus(ad::diag_vec(Lrawv));
    core.L = ad::add(ad::tril_strict(Lrawv), ad::diag_embed(ldiag));
    ad::Var<S> gamma = ad::softplus(ugv);
    ad::Var<S> oscale = cfg.output_scale ? ad::softplus(uov) : ad::Var<S>{};
    core.kernel = graph::kernel_vars(tape, gamma, oscale);
    ad::Var<S> sigma = ad::softplus(usv);
    core.sigma2 = ad::mul(sigma, sigma);

    ad::Var<S> elbo_node = graph::svgp_elbo(tape, core, G, ys, cfg.jitter, 1e-4);
    ad::Var<S> loss = ad::scale(elbo_node, S(-1.0 / n));

    const double neg_elbo = -double(elbo_node.scalar());
    if (!std::isfinite(neg_elbo))
      throw TrainingDivergedError("ELBO became non-finite at iteration " + std::to_string(it));
    if (history) history->push_back(neg_elbo);

    tape.backward(loss);
    std::vector<M> grads;
    grads.reserve(params.size());
    for (auto v : Wv) grads.push_back(tape.grad_of(v));
    for (auto v : bv) grads.push_back(tape.grad_of(v));
    grads.push_back(tape.grad_of(Zv));
    grads.push_back(tape.grad_of(mv));
    grads.push_back(tape.grad_of(Lrawv));
    grads.push_back(tape.grad_of(ugv));
    grads.push_back(tape.grad_of(usv));
    if (cfg.output_scale) grads.push_back(tape.grad_of(uov));
    opt.step(params, grads);
  }

  // freeze: constrained parameters and the final iteration's rescale stats
  DeepKernelModel model;
  for (int j = 0; j < extractor.layers(); ++j) {
    extractor.W[j] = Ws[j].template cast<double>();
    extractor.b[j] = bs[j].template cast<double>();
  }
  model.extractor = std::move(extractor);

  const Eigen::MatrixXd latent_final = mlp_forward(model.extractor, X);
  model.rescale = compute_rescale_stats(latent_final);

  auto softplus_val = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };
  model.svgp.Z = Z.template cast<double>();
  model.svgp.m = m.template cast<double>().col(0);
  Eigen::MatrixXd lraw = L_raw.template cast<double>();
  Eigen::MatrixXd L = lraw.triangularView<Eigen::StrictlyLower>();
  for (int i = 0; i < L.rows(); ++i) L(i, i) = softplus_val(lraw(i, i));
  model.svgp.L_lambda = L;
  model.svgp.kernel.gamma = softplus_val(double(u_gamma(0, 0)));
  model.svgp.kernel.use_output_scale = cfg.output_scale;
  model.svgp.kernel.output_scale = softplus_val(double(u_oscale(0, 0)));
  model.svgp.sigma = softplus_val(double(u_sigma(0, 0)));
  model.svgp.jitter = cfg.jitter;
  model.y_shift = y_shift;
  model.y_scale = y_scale;

  Eigen::MatrixXd kzz = kernel_matrix(model.svgp.kernel, model.svgp.Z, model.svgp.Z);
  const double eps = choose_spd_jitter(kzz, cfg.jitter, 1e-4, false);
  kzz.diagonal().array() += eps;
  model.alpha = Eigen::LLT<Eigen::MatrixXd>(kzz).solve(model.svgp.m);
  return model;
}

}  // namespace

DeepKernelModel train_dkl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const DklConfig& config, std::uint64_t seed,
                          std::vector<double>* neg_elbo_history) {
  if (config.train_float64) return train_impl<double>(X, y, config, seed, neg_elbo_history);
  return train_impl<float>(X, y, config, seed, neg_elbo_history);
}

Eigen::MatrixXd DeepKernelModel::embed(const Eigen::MatrixXd& X) const {
  return rescale_l(rescale, mlp_forward(extractor, X));
}

Eigen::VectorXd DeepKernelModel::predict_batch(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd G = embed(X);
  Eigen::VectorXd mu = kernel_matrix(svgp.kernel, G, svgp.Z) * alpha;
  if (y_scale != 1.0 || y_shift != 0.0) mu = (mu.array() * y_scale + y_shift).matrix();
  return mu;
}

double DeepKernelModel::predict(Eigen::Ref<const Eigen::VectorXd> x) const {
  return predict_batch(x.transpose())[0];
}

double DeepKernelModel::kernel_value(Eigen::Ref<const Eigen::VectorXd> x,
                                     Eigen::Ref<const Eigen::VectorXd> x2) const {
  const Eigen::MatrixXd g1 = embed(x.transpose());
  const Eigen::MatrixXd g2 = embed(x2.transpose());
  return rbf(svgp.kernel, g1.row(0), g2.row(0));
}

namespace {
constexpr char kDklMagic[8] = {'d', 'k', 'm', 'c', 'd', 'k', 'l', '1'};

void write_mat(std::ofstream& os, const Eigen::MatrixXd& m) {
  std::int64_t shape[2] = {m.rows(), m.cols()};
  os.write(reinterpret_cast<const char*>(shape), sizeof shape);
  // row-major blocks
  for (std::int64_t r = 0; r < m.rows(); ++r)
    os.write(reinterpret_cast<const char*>(Eigen::RowVectorXd(m.row(r)).data()),
             std::streamsize(sizeof(double)) * m.cols());
}

Eigen::MatrixXd read_mat(std::ifstream& is) {
  std::int64_t shape[2];
  is.read(reinterpret_cast<char*>(shape), sizeof shape);
  Eigen::MatrixXd m(shape[0], shape[1]);
  Eigen::RowVectorXd row(shape[1]);
  for (std::int64_t r = 0; r < shape[0]; ++r) {
    is.read(reinterpret_cast<char*>(row.data()), std::streamsize(sizeof(double)) * shape[1]);
    m.row(r) = row;
  }
  return m;
}
}  // namespace

void DeepKernelModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write(kDklMagic, 8);
  std::int64_t n_layers = extractor.dims.size();
  os.write(reinterpret_cast<const char*>(&n_layers), sizeof n_layers);
  for (int dim : extractor.dims) {
    std::int64_t v = dim;
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  for (const auto& w : extractor.W) write_mat(os, w);
  for (const auto& b : extractor.b) write_mat(os, b);
  write_mat(os, Eigen::MatrixXd(rescale.min));
  write_mat(os, Eigen::MatrixXd(rescale.max));
  write_mat(os, svgp.Z);
  write_mat(os, svgp.m);
  write_mat(os, svgp.L_lambda);
  const double flags = svgp.kernel.use_output_scale ? 1.0 : 0.0;
  const double scalars[7] = {svgp.kernel.gamma,  svgp.kernel.output_scale, flags,
                             svgp.sigma,         svgp.jitter,              y_shift,
                             y_scale};
  os.write(reinterpret_cast<const char*>(scalars), sizeof scalars);
  write_mat(os, alpha);
}

DeepKernelModel DeepKernelModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kDklMagic, 8))
    throw Error("bad model file header");
  std::int64_t n_layers;
  is.read(reinterpret_cast<char*>(&n_layers), sizeof n_layers);
  DeepKernelModel model;
  model.extractor.dims.resize(n_layers);
  for (auto& dim : model.extractor.dims) {
    std::int64_t v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    dim = int(v);
  }
  for (std::int64_t j = 0; j + 1 < n_layers; ++j) model.extractor.W.push_back(read_mat(is));
  for (std::int64_t j = 0; j + 1 < n_layers; ++j) model.extractor.b.push_back(read_mat(is));
  model.rescale.min = read_mat(is).row(0);
  model.rescale.max = read_mat(is).row(0);
  model.svgp.Z = read_mat(is);
  model.svgp.m = read_mat(is).col(0);
  model.svgp.L_lambda = read_mat(is);
  double scalars[7];
  is.read(reinterpret_cast<char*>(scalars), sizeof scalars);
  model.svgp.kernel.gamma = scalars[0];
  model.svgp.kernel.output_scale = scalars[1];
  model.svgp.kernel.use_output_scale = scalars[2] != 0.0;
  model.svgp.sigma = scalars[3];
  model.svgp.jitter = scalars[4];
  model.y_shift = scalars[5];
  model.y_scale = scalars[6];
  model.alpha = read_mat(is).col(0);
  if (!is) throw Error("truncated model file");
  return model;
}

}  // namespace dkmc
