#include <doctest.h>

#include <cmath>

#include "dkmc/optim.hpp"
#include "dkmc/rng.hpp"
#include "dkmc/tape.hpp"

using namespace dkmc;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {
Mat<double> randm(RandomStream& rs, int r, int c, double scale = 1.0) {
  Mat<double> m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rs.normal();
  return m;
}
}  // namespace

TEST_CASE("d(x^2)/dx = 2x") {
  Tape<double> t;
  auto x = t.leaf(Mat<double>::Constant(1, 1, 3.0));
  auto y = ad::mul(x, x);
  t.backward(y);
  CHECK(t.grad_of(x)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("f(x,y) = x*y + y has grads (y, x+1)") {
  Tape<double> t;
  auto x = t.leaf(Mat<double>::Constant(1, 1, 2.0));
  auto y = t.leaf(Mat<double>::Constant(1, 1, 5.0));
  auto f = ad::add(ad::mul(x, y), y);
  t.backward(f);
  CHECK(t.grad_of(x)(0, 0) == doctest::Approx(5.0));
  CHECK(t.grad_of(y)(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("unused leaves get zero gradients") {
  Tape<double> t;
  auto x = t.leaf(Mat<double>::Constant(1, 1, 2.0));
  auto z = t.leaf(Mat<double>::Constant(3, 2, 1.0));
  auto f = ad::mul(x, x);
  t.backward(f);
  CHECK(t.grad_of(z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects non-scalar outputs") {
  Tape<double> t;
  auto x = t.leaf(Mat<double>::Ones(2, 2));
  auto y = ad::mul(x, x);
  CHECK_THROWS_AS(t.backward(y), ShapeMismatchError);
}

TEST_CASE("shape mismatches are rejected") {
  Tape<double> t;
  auto a = t.leaf(Mat<double>::Ones(2, 3));
  auto b = t.leaf(Mat<double>::Ones(3, 2));
  CHECK_THROWS_AS(ad::add(a, b), ShapeMismatchError);
  CHECK_THROWS_AS(ad::mul(a, b), ShapeMismatchError);
  auto c = t.leaf(Mat<double>::Ones(2, 2));
  CHECK_THROWS_AS(ad::matmul(a, c), ShapeMismatchError);
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape<double> t;
  Mat<double> v(1, 3);
  v << -1.0, 0.0, 2.0;
  auto x = t.leaf(v);
  auto y = ad::sum(ad::relu(x));
  t.backward(y);
  const Mat<double> g = t.grad_of(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(0, 2) == 1.0);
}

TEST_CASE("gradients are bitwise deterministic") {
  RandomStream rs(5, 0, 0, 0);
  const Mat<double> a = randm(rs, 4, 4), b = randm(rs, 4, 4);
  Mat<double> g1, g2;
  for (int rep = 0; rep < 2; ++rep) {
    Tape<double> t;
    auto av = t.leaf(a);
    auto bv = t.leaf(b);
    auto f = ad::sum(ad::exp_(ad::scale(ad::matmul(av, bv), 0.01)));
    t.backward(f);
    (rep == 0 ? g1 : g2) = t.grad_of(av);
  }
  CHECK((g1.array() == g2.array()).all());
}

TEST_CASE("linearity of backward: a*f + b*g") {
  RandomStream rs(9, 0, 0, 0);
  const Mat<double> x0 = randm(rs, 3, 3);
  auto gradf = [&](double ca, double cb) {
    Tape<double> t;
    auto x = t.leaf(x0);
    auto f = ad::sum(ad::mul(x, x));
    auto g = ad::trace(ad::exp_(ad::scale(x, 0.1)));
    auto combo = ad::add(ad::scale(f, ca), ad::scale(g, cb));
    t.backward(combo);
    return Mat<double>(t.grad_of(x));
  };
  const Mat<double> gf = gradf(1.0, 0.0);
  const Mat<double> gg = gradf(0.0, 1.0);
  const Mat<double> gc = gradf(2.5, -1.5);
  CHECK((gc - (2.5 * gf - 1.5 * gg)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite differences: sum of squares is exact to 1e-8") {
  Mat<double> x(3, 1);
  x << 1.0, 2.0, 3.0;
  auto build = [](Tape<double>& t, std::vector<Var<double>>& lv) {
    (void)t;
    return ad::sum(ad::mul(lv[0], lv[0]));
  };
  CHECK(finite_diff_check<double>(build, {x}, 1e-5) < 1e-8);
}

TEST_CASE("finite differences: log-det of I + 0.1*x*x^T") {
  RandomStream rs(31, 0, 0, 0);
  const Mat<double> x = randm(rs, 4, 2);
  auto build = [](Tape<double>& t, std::vector<Var<double>>& lv) {
    auto outer = ad::scale(ad::matmul(lv[0], ad::transpose(lv[0])), 0.1);
    return ad::logdet_spd(ad::add_diag(outer, 1.0));
  };
  CHECK(finite_diff_check<double>(build, {x}, 1e-5) < 1e-5);
}

TEST_CASE("finite differences across every primitive") {
  RandomStream rs(77, 0, 0, 0);
  // each builder must be a pure scalar function of its leaves
  using Builder = std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>;
  std::vector<std::pair<Builder, std::vector<Mat<double>>>> cases;

  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     return ad::sum(ad::div(lv[0], ad::add_const(ad::mul(lv[1], lv[1]), 1.0)));
                   },
                   {randm(rs, 3, 3), randm(rs, 3, 3)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     return ad::sum(ad::softplus(ad::matmul(lv[0], ad::transpose(lv[1]))));
                   },
                   {randm(rs, 2, 4), randm(rs, 3, 4)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     return ad::sum(ad::log_(ad::add_const(ad::exp_(lv[0]), 1.5)));
                   },
                   {randm(rs, 3, 2)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     auto rows = ad::row_sum(ad::relu(lv[0]));
                     auto cols = ad::col_sum(ad::mul(lv[0], lv[0]));
                     return ad::add(ad::sum(rows), ad::sum(ad::mul(cols, cols)));
                   },
                   {randm(rs, 4, 3)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     auto mn = ad::col_min(lv[0]);
                     auto mx = ad::col_max(lv[0]);
                     return ad::sum(ad::mul(ad::sub(mx, mn), ad::sub(mx, mn)));
                   },
                   {randm(rs, 5, 3)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     auto r = ad::rep_rows(lv[1], 4);
                     auto c = ad::rep_cols(lv[2], 3);
                     return ad::sum(ad::mul(ad::add(lv[0], r), c));
                   },
                   {randm(rs, 4, 3), randm(rs, 1, 3), randm(rs, 4, 1)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     auto scaled = ad::bscale(lv[0], lv[1]);
                     auto shifted = ad::add_rowvec(scaled, lv[2]);
                     auto sub = ad::sub_rowvec(shifted, ad::col_min(shifted));
                     auto divd = ad::div_rowvec(
                         sub, ad::add_const(ad::sub(ad::col_max(shifted), ad::col_min(shifted)),
                                            0.5));
                     return ad::sum(ad::mul(divd, divd));
                   },
                   {randm(rs, 4, 2), randm(rs, 1, 1), randm(rs, 1, 2)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     auto lower = ad::add(ad::tril_strict(lv[0]),
                                          ad::diag_embed(ad::softplus(ad::diag_vec(lv[0]))));
                     auto lam = ad::matmul(lower, ad::transpose(lower));
                     auto spd = ad::add_diag(lam, 0.7);
                     auto sol = ad::chol_solve(spd, lv[1]);
                     return ad::add(ad::sum(ad::mul(sol, sol)), ad::logdet_spd(spd));
                   },
                   {randm(rs, 3, 3), randm(rs, 3, 2)}});
  cases.push_back({[](Tape<double>&, std::vector<Var<double>>& lv) {
                     return ad::trace(ad::matmul(lv[0], ad::transpose(lv[0])));
                   },
                   {randm(rs, 3, 4)}});

  for (std::size_t i = 0; i < cases.size(); ++i) {
    CAPTURE(i);
    CHECK(finite_diff_check<double>(cases[i].first, cases[i].second, 1e-5) < 1e-4);
  }
}

TEST_CASE("gradcheck holds at 10 random points for a composite objective") {
  RandomStream rs(123, 4, 0, 0);
  for (int trial = 0; trial < 10; ++trial) {
    auto build = [](Tape<double>&, std::vector<Var<double>>& lv) {
      auto q = ad::matmul(ad::transpose(lv[0]), lv[0]);
      auto spd = ad::add_diag(ad::scale(q, 0.2), 1.0);
      return ad::add(ad::logdet_spd(spd), ad::sum(ad::exp_(ad::scale(lv[0], 0.3))));
    };
    CHECK(finite_diff_check<double>(build, {randm(rs, 3, 3)}, 1e-5) < 1e-4);
  }
}
