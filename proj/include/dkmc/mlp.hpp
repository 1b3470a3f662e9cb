#pragma once

#include <vector>

#include <Eigen/Core>

#include "dkmc/errors.hpp"
#include "dkmc/rng.hpp"
#include "dkmc/tape.hpp"

namespace dkmc {

/// Fully connected d -> d1 -> ... -> d' network, ReLU between layers and no
/// activation after the last. Weights are stored input-major (W[j] maps
/// layer j's inputs, as rows, to outputs, as columns), so a batch forward
/// is H * W + b with H holding one sample per row.
struct FeatureExtractor {
  std::vector<int> dims;  // {d, d1, ..., d'}
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::RowVectorXd> b;

  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
  int layers() const { return int(W.size()); }
};

/// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights and biases.
FeatureExtractor init_extractor(const std::vector<int>& dims, RandomStream& rs);

/// Batch forward: X is N x d, result N x d'.
Eigen::MatrixXd mlp_forward(const FeatureExtractor& f, const Eigen::MatrixXd& X);

/// Per-latent-dimension extrema of the training batch's network outputs;
/// the affine range of the rescale map l.
struct RescaleStats {
  Eigen::RowVectorXd min;
  Eigen::RowVectorXd max;
};

RescaleStats compute_rescale_stats(const Eigen::MatrixXd& latent);

/// Piecewise map into [-1,1] per dimension: below the batch minimum -> -1,
/// above the batch maximum -> +1, affine in between. A degenerate dimension
/// (max == min) maps to 0.
Eigen::MatrixXd rescale_l(const RescaleStats& stats, const Eigen::MatrixXd& V);

namespace graph {

template <class S>
ad::Var<S> mlp_forward(ad::Tape<S>& t, const std::vector<ad::Var<S>>& W,
                       const std::vector<ad::Var<S>>& b, ad::Var<S> X) {
  (void)t;
  ad::Var<S> h = X;
  for (std::size_t j = 0; j < W.size(); ++j) {
    if (h.cols() != W[j].rows()) throw ShapeMismatchError("mlp_forward: layer dim mismatch");
    h = ad::add_rowvec(ad::matmul(h, W[j]), b[j]);
    if (j + 1 < W.size()) h = ad::relu(h);
  }
  return h;
}

/// In-batch rescale: min/max are taken over the rows of the node itself,
/// so gradients flow through the batch extrema. Every output lands in
/// [-1, 1] by construction (no clamping branch is ever active in-batch).
template <class S>
ad::Var<S> rescale(ad::Tape<S>& t, ad::Var<S> latent) {
  (void)t;
  ad::Var<S> mn = ad::col_min(latent);
  ad::Var<S> mx = ad::col_max(latent);
  ad::Var<S> range = ad::sub(mx, mn);
  return ad::add_const(ad::scale(ad::div_rowvec(ad::sub_rowvec(latent, mn), range), S(2)),
                       S(-1));
}

}  // namespace graph

}  // namespace dkmc
