#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace smw {

// SplitMix64 finalizer. Used to turn small, structured seeds (base + i,
// seed ^ 1, ...) into well separated engine states.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Substream tags. Every random object in the library derives its seed as
// `seed ^ tag`, so one integer seed replays a whole trial.
namespace stream {
// Tags sit above bit 32 so that trial seeds base + t never alias another
// trial's substream.
inline constexpr std::uint64_t e1 = 0x0;
inline constexpr std::uint64_t e2 = 0x1ULL << 40;
inline constexpr std::uint64_t e3 = 0x2ULL << 40;
inline constexpr std::uint64_t update_u = 0x3ULL << 40;
inline constexpr std::uint64_t update_v = 0x4ULL << 40;
inline constexpr std::uint64_t matrix_a = 0xA5A5000000000000ULL;
inline constexpr std::uint64_t updates = 0x5A5A000000000000ULL;
inline constexpr std::uint64_t left_basis = 0x3C3C000000000000ULL;
inline constexpr std::uint64_t right_basis = 0xC3C3000000000000ULL;
inline constexpr std::uint64_t small_core = 0x0F0F000000000000ULL;
}  // namespace stream

/// Portable standard-normal generator.
///
/// std::normal_distribution is implementation defined, so experiments would
/// not replay across standard libraries. This uses mt19937_64 (bit-exact by
/// the standard) with 53-bit uniforms and the Marsaglia polar method.
class NormalRng {
 public:
  explicit NormalRng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double x, y, s;
    do {
      x = 2.0 * uniform() - 1.0;
      y = 2.0 * uniform() - 1.0;
      s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * f;
    has_spare_ = true;
    return x * f;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// rows x cols matrix of independent standard normals, filled column by column.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       std::uint64_t seed) {
  NormalRng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace smw
