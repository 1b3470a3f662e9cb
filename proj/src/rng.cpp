#include "dkmc/rng.hpp"

#include <cmath>

namespace dkmc {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace

std::array<std::uint64_t, 4> Philox4x64::block(const std::array<std::uint64_t, 2>& key,
                                               const std::array<std::uint64_t, 4>& counter) {
  std::uint64_t k0 = key[0], k1 = key[1];
  std::array<std::uint64_t, 4> x = counter;
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, x[0], hi0, lo0);
    mulhilo(kMul1, x[2], hi1, lo1);
    x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return x;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t RandomStream::next_u64() {
  if (lane_ == 4) {
    buf_ = Philox4x64::block(key_, ctr_);
    ++ctr_[2];  // block index; words 0/1 identify the stream
    lane_ = 0;
  }
  return buf_[lane_++];
}

double RandomStream::uniform() {
  // (0, 1]: 53-bit mantissa, complemented so log() is safe.
  return 1.0 - static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  double z[2];
  fill_normals(z, 1);
  return z[0];
}

void RandomStream::fill_normals(double* out, int count) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int i = 0; i < count; i += 2) {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(two_pi * u2);
    if (i + 1 < count) out[i + 1] = r * std::sin(two_pi * u2);
  }
}

int RandomStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  // mean is lambda*dt, well below 1 in the experiments; cap guards the tail.
  while (u > cdf && k < 1000) {
    ++k;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

}  // namespace dkmc
