#pragma once

#include <vector>

#include <Eigen/Core>

#include "dkmc/errors.hpp"

namespace dkmc {

/// Monomial basis of total degree <= `degree` in graded lexicographic order:
/// [1, x_1, ..., x_d, x_1^2, x_1 x_2, ..., x_d^2, ...]. Degree 2 is the
/// pricing basis (J = 1 + d + d(d+1)/2 with cross terms); degrees up to 5
/// are supported only at d <= 3 for the surface-comparison tool.
struct PolyBasis {
  int d = 0;
  int degree = 2;
  bool cross_terms = true;  // off: [1, x_i, x_i^2] only (degree 2)

  int size() const;
  void features(Eigen::Ref<const Eigen::VectorXd> x, Eigen::Ref<Eigen::RowVectorXd> out) const;
};

Eigen::VectorXd poly_features(Eigen::Ref<const Eigen::VectorXd> x, int degree);

struct PolyRegressor {
  PolyBasis basis;
  Eigen::VectorXd coeffs;
};

/// Least-squares fit over the basis span. Normal equations (accumulated in
/// row blocks, solved by LLT) on the standardized feature columns; falls
/// back to a complete orthogonal decomposition for the minimum-norm solution
/// when the Gram matrix is rank deficient.
PolyRegressor lsm_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const PolyBasis& basis);

double lsm_predict(const PolyRegressor& reg, Eigen::Ref<const Eigen::VectorXd> x);
Eigen::VectorXd lsm_predict_batch(const PolyRegressor& reg, const Eigen::MatrixXd& X);

}  // namespace dkmc
