#include "dkmc/lsm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace dkmc {

namespace {

void check_basis(const PolyBasis& b) {
  if (b.d < 1) throw InvalidConfigError("poly basis: d must be >= 1");
  if (b.degree == 2) return;
  if (b.degree >= 1 && b.degree <= 5 && b.d <= 3) return;  // surface-comparison variants
  throw UnsupportedDegreeError("polynomial degree " + std::to_string(b.degree) +
                               " supported only at d <= 3");
}

// exponent vectors of total degree t, e1 descending (graded lex)
void gen_exponents(int d, int t, int pos, std::vector<int>& cur,
                   std::vector<std::vector<int>>& out) {
  if (pos == d - 1) {
    cur[pos] = t;
    out.push_back(cur);
    return;
  }
  for (int e = t; e >= 0; --e) {
    cur[pos] = e;
    gen_exponents(d, t - e, pos + 1, cur, out);
  }
}

std::vector<std::vector<int>> basis_exponents(const PolyBasis& b) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(b.d, 0);
  for (int t = 0; t <= b.degree; ++t) gen_exponents(b.d, t, 0, cur, out);
  return out;
}

}  // namespace

int PolyBasis::size() const {
  check_basis(*this);
  if (!cross_terms) return 1 + d * degree;
  // C(d + degree, degree)
  long long j = 1;
  for (int i = 1; i <= degree; ++i) j = j * (d + i) / i;
  return int(j);
}

void PolyBasis::features(Eigen::Ref<const Eigen::VectorXd> x,
                         Eigen::Ref<Eigen::RowVectorXd> out) const {
  if (x.size() != d) throw ShapeMismatchError("poly features: input dim mismatch");
  if (!cross_terms) {
    out(0) = 1.0;
    for (int i = 0; i < d; ++i) {
      double p = 1.0;
      for (int t = 0; t < degree; ++t) {
        p *= x[i];
        out(1 + t * d + i) = p;
      }
    }
    return;
  }
  if (degree == 2) {
    out(0) = 1.0;
    for (int i = 0; i < d; ++i) out(1 + i) = x[i];
    int k = 1 + d;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) out(k++) = x[i] * x[j];
    return;
  }
  const auto expo = basis_exponents(*this);
  for (std::size_t j = 0; j < expo.size(); ++j) {
    double v = 1.0;
    for (int i = 0; i < d; ++i)
      for (int e = 0; e < expo[j][i]; ++e) v *= x[i];
    out(int(j)) = v;
  }
}

Eigen::VectorXd poly_features(Eigen::Ref<const Eigen::VectorXd> x, int degree) {
  PolyBasis b{int(x.size()), degree, true};
  check_basis(b);
  Eigen::RowVectorXd out(b.size());
  b.features(x, out);
  return out.transpose();
}

PolyRegressor lsm_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const PolyBasis& basis_in) {
  PolyBasis basis = basis_in;
  basis.d = int(X.cols());
  check_basis(basis);
  const int n = int(X.rows());
  if (n < 1 || y.size() != n) throw ShapeMismatchError("lsm_fit: |X| != |y|");
  const int J = basis.size();

  // normal equations accumulated over row blocks; the feature matrix never
  // materializes whole at d=100 scale
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(J, J);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(J);
  const int block = 4096;
  Eigen::MatrixXd phi(std::min(block, n), J);
  for (int start = 0; start < n; start += block) {
    const int len = std::min(block, n - start);
    for (int r = 0; r < len; ++r) phi.row(r).noalias() = Eigen::RowVectorXd::Zero(J);
    for (int r = 0; r < len; ++r) {
      Eigen::RowVectorXd row(J);
      basis.features(X.row(start + r), row);
      phi.row(r) = row;
    }
    auto phb = phi.topRows(len);
    G.selfadjointView<Eigen::Lower>().rankUpdate(phb.transpose());
    c.noalias() += phb.transpose() * y.segment(start, len);
  }
  G.triangularView<Eigen::StrictlyUpper>() = G.transpose();

  // column RMS scaling repairs the huge magnitude spread between 1, x and
  // x_i x_j features before the Cholesky
  Eigen::VectorXd scale_d = (G.diagonal() / n).cwiseMax(1e-300).cwiseSqrt();
  Eigen::MatrixXd Gs = scale_d.cwiseInverse().asDiagonal() * G *
                       scale_d.cwiseInverse().asDiagonal();
  Eigen::VectorXd cs = c.cwiseQuotient(scale_d);

  PolyRegressor reg;
  reg.basis = basis;
  Eigen::LLT<Eigen::MatrixXd> llt(Gs);
  if (llt.info() == Eigen::Success) {
    reg.coeffs = llt.solve(cs).cwiseQuotient(scale_d);
    return reg;
  }

  // rank-deficient design: minimum-norm solution via a complete orthogonal
  // decomposition of the full feature matrix
  Eigen::MatrixXd full_phi(n, J);
  for (int r = 0; r < n; ++r) {
    Eigen::RowVectorXd row(J);
    basis.features(X.row(r), row);
    full_phi.row(r) = row;
  }
  reg.coeffs = full_phi.completeOrthogonalDecomposition().solve(y);
  return reg;
}

double lsm_predict(const PolyRegressor& reg, Eigen::Ref<const Eigen::VectorXd> x) {
  Eigen::RowVectorXd row(reg.basis.size());
  reg.basis.features(x, row);
  return row.dot(reg.coeffs.transpose());
}

Eigen::VectorXd lsm_predict_batch(const PolyRegressor& reg, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(X.rows());
  Eigen::RowVectorXd row(reg.basis.size());
  for (int r = 0; r < X.rows(); ++r) {
    reg.basis.features(X.row(r), row);
    out[r] = row.dot(reg.coeffs.transpose());
  }
  return out;
}

}  // namespace dkmc
