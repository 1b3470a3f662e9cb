#pragma once

#include <Eigen/Core>

#include "dkmc/errors.hpp"

namespace dkmc {

enum class PayoffKind { MaxCall, GeoBasketPut };

struct PayoffSpec {
  PayoffKind kind = PayoffKind::MaxCall;
  double strike = 100.0;
};

/// Immediate exercise value h(s). Geometric mean is computed in log space
/// so d=100 baskets cannot overflow. Throws DomainError on s <= 0.
double evaluate(const PayoffSpec& spec, Eigen::Ref<const Eigen::VectorXd> s);

/// e^{-r (t_b - t_a)}
double discount(double r, double t_a, double t_b);

}  // namespace dkmc
