#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tddelta {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Integer power with 0^0 == 1, matching the convention used by every k-step target.
template <typename Scalar>
Scalar ipow(Scalar base, int exponent) {
  Scalar result(1);
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

/// Seed mixer (splitmix64). Used to derive independent stream seeds from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

/**
 * Portable random source.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Uniforms are built from the top 53 bits of each draw and
 * categorical sampling is inverse-CDF over the given row, so every draw is
 * reproducible across standard libraries (std distributions are not).
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index drawn from an unnormalized-safe probability row (assumed to sum to 1).
  template <typename Derived>
  int categorical(const Eigen::DenseBase<Derived>& probs) {
    const double u = uniform();
    double cumulative = 0.0;
    const Eigen::Index n = probs.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      cumulative += static_cast<double>(probs(i));
      if (u < cumulative) return static_cast<int>(i);
    }
    // Rounding can leave the cumulative sum a hair below 1; fall back to the
    // last index with positive mass.
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      if (probs(i) > 0) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
  }

  /// Standard normal via Box-Muller (used only by test and instance generators).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tddelta
