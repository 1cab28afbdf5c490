#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include <Eigen/Dense>

namespace serialmon {

/// Derives independent child seeds from a master seed (SplitMix64).
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

/// Named streams split from the scenario master seed.
enum class SeedStream : std::uint64_t { kPlantNoise = 1, kAttack = 2, kCalibration = 3 };

inline std::uint64_t split_seed(std::uint64_t master, SeedStream stream) {
  return split_seed(master, static_cast<std::uint64_t>(stream));
}

/// Seedable random source. Uniforms take the top 53 bits of a 64-bit
/// Mersenne Twister; normals use the Box-Muller transform with the second
/// variate cached, so the draw sequence is fixed for a given seed on every
/// platform.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  Eigen::VectorXd normal_vector(Eigen::Index n);
  /// Uniformly distributed direction on the unit sphere in R^n.
  Eigen::VectorXd unit_vector(Eigen::Index n);

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_normal_;
};

}  // namespace serialmon
