#include <doctest.h>

#include <cmath>
#include <set>

#include "dkmc/rng.hpp"

using namespace dkmc;

TEST_CASE("philox4x64-10 matches the numpy reference stream") {
  // numpy.random.Philox(key=k, counter=c).random_raw(4) pre-increments the
  // counter's first word, so its outputs equal block(key, c + 1)
  {
    auto b0 = Philox4x64::block({0, 0}, {1, 0, 0, 0});
    CHECK(b0[0] == 0x02f4ba6408e4d89bULL);
    CHECK(b0[1] == 0x3dd62b0b9ca8c5b2ULL);
    CHECK(b0[2] == 0x1c8667a55d902e79ULL);
    CHECK(b0[3] == 0x907d7a052fd5b4dcULL);
    auto b1 = Philox4x64::block({0, 0}, {2, 0, 0, 0});
    CHECK(b1[0] == 0x809bf322883987c3ULL);
    CHECK(b1[1] == 0x471128b9e807f7ddULL);
    CHECK(b1[2] == 0xf250ba0dbec065b7ULL);
    CHECK(b1[3] == 0xfc6ed66767a457bcULL);
  }
  {
    auto b = Philox4x64::block({1, 0}, {1, 0, 0, 0});
    CHECK(b[0] == 0x4db6a27b756282dfULL);
    CHECK(b[1] == 0xd944fa03babe0e2fULL);
    CHECK(b[2] == 0x27f872e577060d32ULL);
    CHECK(b[3] == 0x07f697696a0482a2ULL);
  }
  {
    auto b = Philox4x64::block({0xDEADBEEF12345678ULL, 0}, {1, 0, 0, 0});
    CHECK(b[0] == 0x01e08b9944fc9ce9ULL);
    CHECK(b[1] == 0x4dd35999ef97e4c4ULL);
    CHECK(b[2] == 0xfb4385fe6262b926ULL);
    CHECK(b[3] == 0xe8ca5d2e2ace8c50ULL);
  }
  {
    auto b = Philox4x64::block({42, 0}, {8, 3, 0, 0});
    CHECK(b[0] == 0xa8dcdfb0ad1fac55ULL);
    CHECK(b[1] == 0x5c9d35260a7bb0a6ULL);
    CHECK(b[2] == 0xab90dcb148929aacULL);
    CHECK(b[3] == 0x43acc3fcec514733ULL);
  }
}

TEST_CASE("streams are independent and deterministic") {
  RandomStream a(123, 5, 7, 0), b(123, 5, 7, 0), c(123, 6, 7, 0);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());  // different stream id
  }
}

TEST_CASE("uniform lands in (0, 1]") {
  RandomStream rs(7, 0, 0, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rs.uniform();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("normals have the right first two moments") {
  RandomStream rs(99, 1, 0, 0);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rs.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("poisson inversion has the right mean and uses one uniform") {
  RandomStream rs(5, 2, 0, 0);
  const int n = 100000;
  const double mean = 0.5;
  long total = 0;
  for (int i = 0; i < n; ++i) total += rs.poisson(mean);
  const double est = double(total) / n;
  // se of the mean is sqrt(lambda/n)
  CHECK(std::abs(est - mean) < 3.0 * std::sqrt(mean / n));
  CHECK(rs.poisson(0.0) == 0);
  CHECK(rs.poisson(-1.0) == 0);
}

TEST_CASE("mix_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(mix_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(mix_seed(42, 1) == mix_seed(42, 1));
  CHECK(mix_seed(42, 1) != mix_seed(43, 1));
}
