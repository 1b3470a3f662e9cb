#include <doctest.h>

#include "dkmc/optim.hpp"

using namespace dkmc;
using ad::Mat;

TEST_CASE("plain gradient step") {
  Sgd<double> opt({0.1, 0.0, 0.0});
  Mat<double> p = Mat<double>::Constant(1, 1, 1.0);
  std::vector<Mat<double>> g{Mat<double>::Constant(1, 1, 2.0)};
  opt.step({&p}, g);
  CHECK(p(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("momentum accumulates over two steps") {
  Sgd<double> opt({0.1, 0.9, 0.0});
  Mat<double> p = Mat<double>::Zero(1, 1);
  std::vector<Mat<double>> g{Mat<double>::Constant(1, 1, 1.0)};
  opt.step({&p}, g);
  CHECK(p(0, 0) == doctest::Approx(-0.1));
  opt.step({&p}, g);
  // v2 = 0.9*1 + 1 = 1.9, p = -0.1 - 0.19
  CHECK(p(0, 0) == doctest::Approx(-0.29));
}

TEST_CASE("weight decay alone shrinks the parameter") {
  Sgd<double> opt({0.1, 0.0, 1e-8});
  Mat<double> p = Mat<double>::Constant(1, 1, 1e6);
  std::vector<Mat<double>> g{Mat<double>::Zero(1, 1)};
  opt.step({&p}, g);
  CHECK(p(0, 0) == doctest::Approx(1e6 - 1e-3));
}

TEST_CASE("shape mismatch raises") {
  Sgd<double> opt({0.1, 0.0, 0.0});
  Mat<double> p = Mat<double>::Zero(2, 2);
  std::vector<Mat<double>> g{Mat<double>::Zero(3, 1)};
  CHECK_THROWS_AS(opt.step({&p}, g), ShapeMismatchError);
}
