#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace dkmc {

/// Philox4x64-10 counter-based generator; the round function is verified
/// against numpy's np.random.Philox raw outputs. Stateless: each 256-bit
/// block is a pure function of (key, counter), which is what makes
/// per-(path, step) streams reproducible independent of thread count.
struct Philox4x64 {
  static std::array<std::uint64_t, 4> block(const std::array<std::uint64_t, 2>& key,
                                            const std::array<std::uint64_t, 4>& counter);
};

/// Mixes a seed and a stream label into a fresh 64-bit key (splitmix64
/// finalizer). Used to derive batch seeds and per-stage training seeds
/// from the master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// One logical draw sequence, e.g. "all randomness consumed by path j at
/// time step i". Draw order is fixed and documented at the call sites;
/// normals come from Box-Muller pairs, Poisson counts from a single
/// uniform via CDF inversion.
class RandomStream {
 public:
  RandomStream(std::uint64_t key0, std::uint64_t key1, std::uint64_t ctr0, std::uint64_t ctr1)
      : key_{key0, key1}, ctr_{ctr0, ctr1, 0, 0}, lane_(4) {}

  std::uint64_t next_u64();

  /// Uniform on (0, 1].
  double uniform();

  double normal();

  /// Fills count normals from ceil(count/2) Box-Muller pairs; a spare
  /// half-pair is discarded so consumption is a function of count alone.
  void fill_normals(double* out, int count);
  void fill_normals(Eigen::Ref<Eigen::VectorXd> out) { fill_normals(out.data(), int(out.size())); }

  int poisson(double mean);

 private:
  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> ctr_;
  std::array<std::uint64_t, 4> buf_{};
  int lane_;
};

}  // namespace dkmc
