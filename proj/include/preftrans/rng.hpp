#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "preftrans/sphere.hpp"

namespace preftrans {

/// Seeded generator whose draws are identical across standard libraries.
/// std::uniform_real_distribution and friends are implementation-defined,
/// so only the raw mt19937_64 stream is used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box–Muller.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  UnitVec3 on_sphere() {
    for (;;) {
      const Vec3 v{normal(), normal(), normal()};
      if (norm(v) > 1e-6) return normalize(v);
    }
  }

  /// Uniform (area measure) in the closed geodesic cap of the given radius.
  UnitVec3 in_cap(const UnitVec3& center, double radius) {
    const double z = 1.0 - uniform() * (1.0 - std::cos(radius));
    return from_polar(center, std::acos(std::clamp(z, -1.0, 1.0)), 2.0 * std::numbers::pi * uniform());
  }

  /// Tangent vector at x with uniform direction and length uniform in [0, r_max].
  Vec3 tangent(const UnitVec3& x, double r_max) {
    const auto [e1, e2] = basis_at(x);
    const double ang = 2.0 * std::numbers::pi * uniform();
    return (r_max * uniform()) * (std::cos(ang) * e1.vec() + std::sin(ang) * e2.vec());
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace preftrans
