#include "dkmc/payoff.hpp"

#include <cmath>

namespace dkmc {

double evaluate(const PayoffSpec& spec, Eigen::Ref<const Eigen::VectorXd> s) {
  if ((s.array() <= 0.0).any()) throw DomainError("payoff requires strictly positive prices");
  switch (spec.kind) {
    case PayoffKind::MaxCall:
      return std::max(s.maxCoeff() - spec.strike, 0.0);
    case PayoffKind::GeoBasketPut: {
      const double geo = std::exp(s.array().log().mean());
      return std::max(spec.strike - geo, 0.0);
    }
  }
  return 0.0;
}

double discount(double r, double t_a, double t_b) {
  return std::exp(-r * (t_b - t_a));
}

}  // namespace dkmc
