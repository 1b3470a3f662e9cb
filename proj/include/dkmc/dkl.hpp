#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dkmc/gp.hpp"
#include "dkmc/mlp.hpp"
#include "dkmc/optim.hpp"

namespace dkmc {

struct DklConfig {
  std::vector<int> hidden_dims = {1000, 500, 50};
  int latent_dim = 2;
  int inducing = 40;
  int iterations = 1500;
  SgdConfig sgd{};  // lr 0.1, momentum 0.9, weight decay 1e-8
  double gamma_init = 1.0;
  double sigma_init = 0.1;
  double lchol_init = 0.1;
  bool output_scale = false;
  bool standardize_targets = false;
  bool train_float64 = false;  // default float32, the reference-stack precision
  double jitter = 1e-6;

  std::vector<int> full_dims(int d) const {
    std::vector<int> dims{d};
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(latent_dim);
    return dims;
  }
};

/// Trained deep-kernel regressor: extractor + frozen rescale stats + SVGP
/// variational state. Prediction is pure.
struct DeepKernelModel {
  FeatureExtractor extractor;
  RescaleStats rescale;
  SvgpState svgp;
  Eigen::VectorXd alpha;  // cached K_ZZ^{-1} m (with the state's jitter)
  double y_shift = 0.0;
  double y_scale = 1.0;

  /// Latent embedding g(x) = l(Psi(x)) with the frozen stats.
  Eigen::MatrixXd embed(const Eigen::MatrixXd& X) const;

  /// Variational posterior mean at x (the continuation-value estimate).
  double predict(Eigen::Ref<const Eigen::VectorXd> x) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& X) const;

  /// The deep kernel k_RBF(g(x), g(x')).
  double kernel_value(Eigen::Ref<const Eigen::VectorXd> x,
                      Eigen::Ref<const Eigen::VectorXd> x2) const;

  void save(const std::string& path) const;
  static DeepKernelModel load(const std::string& path);
};

/// Joint SGD training of the extractor and the sparse variational GP by
/// minimizing -ELBO/N over `iterations` full-batch steps. The latent inputs
/// (and their rescale extrema) are recomputed from the current network every
/// iteration; the final iteration's stats are frozen into the model.
/// Throws TrainingDivergedError if the objective becomes non-finite.
DeepKernelModel train_dkl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const DklConfig& config, std::uint64_t seed,
                          std::vector<double>* neg_elbo_history = nullptr);

}  // namespace dkmc
