#include "dkmc/mlp.hpp"

#include <cmath>

namespace dkmc {

FeatureExtractor init_extractor(const std::vector<int>& dims, RandomStream& rs) {
  if (dims.size() < 2) throw InvalidConfigError("extractor needs at least input and output dims");
  FeatureExtractor f;
  f.dims = dims;
  for (std::size_t j = 0; j + 1 < dims.size(); ++j) {
    const int fan_in = dims[j], fan_out = dims[j + 1];
    const double bound = std::sqrt(1.0 / fan_in);
    Eigen::MatrixXd w(fan_in, fan_out);
    // draw in (out, in) order, row-major over the mathematical W matrix
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(c, r) = bound * (2.0 * rs.uniform() - 1.0);
    Eigen::RowVectorXd bias(fan_out);
    for (int r = 0; r < fan_out; ++r) bias(r) = bound * (2.0 * rs.uniform() - 1.0);
    f.W.push_back(std::move(w));
    f.b.push_back(std::move(bias));
  }
  return f;
}

Eigen::MatrixXd mlp_forward(const FeatureExtractor& f, const Eigen::MatrixXd& X) {
  if (X.cols() != f.in_dim()) throw ShapeMismatchError("mlp_forward: input dim mismatch");
  Eigen::MatrixXd h = X;
  for (int j = 0; j < f.layers(); ++j) {
    Eigen::MatrixXd a = h * f.W[j];
    a.rowwise() += f.b[j];
    if (j + 1 < f.layers()) a = a.cwiseMax(0.0);
    h = std::move(a);
  }
  return h;
}

RescaleStats compute_rescale_stats(const Eigen::MatrixXd& latent) {
  if (latent.rows() == 0) throw InvalidConfigError("rescale stats need a nonempty batch");
  return {latent.colwise().minCoeff(), latent.colwise().maxCoeff()};
}

Eigen::MatrixXd rescale_l(const RescaleStats& stats, const Eigen::MatrixXd& V) {
  if (V.cols() != stats.min.size()) throw ShapeMismatchError("rescale_l: dim mismatch");
  Eigen::MatrixXd out(V.rows(), V.cols());
  for (int c = 0; c < V.cols(); ++c) {
    const double lo = stats.min[c], hi = stats.max[c];
    const double range = hi - lo;
    for (int r = 0; r < V.rows(); ++r) {
      const double v = V(r, c);
      if (range <= 0.0)
        out(r, c) = 0.0;
      else if (v < lo)
        out(r, c) = -1.0;
      else if (v > hi)
        out(r, c) = 1.0;
      else
        out(r, c) = 2.0 * (v - lo) / range - 1.0;
    }
  }
  return out;
}

}  // namespace dkmc
