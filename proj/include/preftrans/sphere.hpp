#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "preftrans/error.hpp"

namespace preftrans {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Point on the unit sphere. Only constructible through normalize() or
/// UnitVec3::unchecked(), so the unit-norm invariant holds for every value.
class UnitVec3 {
 public:
  UnitVec3() : v_{0.0, 0.0, 1.0} {}

  /// Caller guarantees |v| == 1 up to roundoff.
  static UnitVec3 unchecked(const Vec3& v) { return UnitVec3(v); }

  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }  // NOLINT(google-explicit-constructor)
  double x() const { return v_.x; }
  double y() const { return v_.y; }
  double z() const { return v_.z; }

  friend UnitVec3 operator-(const UnitVec3& u) { return UnitVec3(-u.v_); }
  friend bool operator==(const UnitVec3&, const UnitVec3&) = default;

 private:
  explicit UnitVec3(const Vec3& v) : v_(v) {}
  Vec3 v_;
};

inline UnitVec3 normalize(const Vec3& v) {
  const double n = norm(v);
  if (!(n > 1e-14)) fail(Errc::DegenerateInput, "cannot normalize a (near) zero vector");
  return UnitVec3::unchecked(v / n);
}

struct TangentVector {
  UnitVec3 base;
  Vec3 vec;

  double length() const { return norm(vec); }
};

/// Removes the normal component of v at x.
inline TangentVector project_tangent(const UnitVec3& x, const Vec3& v) {
  return {x, v - dot(v, x.vec()) * x.vec()};
}

/// Orthonormal triple (x, p_hat, q_hat = x × p_hat).
struct TangentFrame {
  UnitVec3 x;
  UnitVec3 p_hat;
  UnitVec3 q_hat;
};

inline constexpr double kFrameEpsilon = 1e-9;

inline TangentFrame tangent_frame(const UnitVec3& x, const TangentVector& p,
                                  double eps = kFrameEpsilon) {
  const double pn = p.length();
  if (pn < eps) fail(Errc::FrameUndefined, "tangent vector too short to define a direction");
  const auto p_hat = UnitVec3::unchecked(p.vec / pn);
  return {x, p_hat, UnitVec3::unchecked(cross(x.vec(), p_hat.vec()))};
}

/// Deterministic orthonormal tangent basis (e1, e2 = x × e1) at x.
inline std::array<UnitVec3, 2> basis_at(const UnitVec3& x) {
  const Vec3& v = x.vec();
  // Seed with the coordinate axis least aligned with x.
  Vec3 seed{1.0, 0.0, 0.0};
  if (std::abs(v.y) <= std::abs(v.x) && std::abs(v.y) <= std::abs(v.z)) seed = {0.0, 1.0, 0.0};
  else if (std::abs(v.z) <= std::abs(v.x) && std::abs(v.z) <= std::abs(v.y)) seed = {0.0, 0.0, 1.0};
  const UnitVec3 e1 = normalize(seed - dot(seed, v) * v);
  return {e1, UnitVec3::unchecked(cross(v, e1.vec()))};
}

/// Basis (e1, e2) of the tangent plane at x that starts from `hint` when the
/// hint is not parallel to x; used to keep angle conventions stable.
inline std::array<UnitVec3, 2> basis_at(const UnitVec3& x, const Vec3& hint) {
  const Vec3 t = hint - dot(hint, x.vec()) * x.vec();
  if (norm(t) < 1e-10) return basis_at(x);
  const UnitVec3 e1 = normalize(t);
  return {e1, UnitVec3::unchecked(cross(x.vec(), e1.vec()))};
}

inline double clamped_dot(const UnitVec3& a, const UnitVec3& b) {
  return std::clamp(dot(a.vec(), b.vec()), -1.0, 1.0);
}

/// Angle between a and b in [0, π]. Same value as acos of the clamped dot
/// product, but atan2 keeps full relative precision for nearly equal points,
/// where acos(1 − δ) can only resolve angles down to about 1.5e-8.
inline double geodesic_distance(const UnitVec3& a, const UnitVec3& b) {
  return std::atan2(norm(cross(a.vec(), b.vec())), dot(a.vec(), b.vec()));
}

/// Exponential map on S²: walk |v| radians from x along tangent v.
inline UnitVec3 exp_map(const UnitVec3& x, const Vec3& v) {
  const double t = norm(v);
  if (t < 1e-300) return x;
  return normalize(std::cos(t) * x.vec() + (std::sin(t) / t) * v);
}

/// Point at polar angle theta from `pole` and azimuth phi measured in basis_at(pole).
inline UnitVec3 from_polar(const UnitVec3& pole, double theta, double phi) {
  const auto [e1, e2] = basis_at(pole);
  return normalize(std::cos(theta) * pole.vec() +
                   std::sin(theta) * (std::cos(phi) * e1.vec() + std::sin(phi) * e2.vec()));
}

struct Mat2 {
  double a00 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0;

  double det() const { return a00 * a11 - a01 * a10; }
  friend Mat2 operator+(const Mat2& a, const Mat2& b) {
    return {a.a00 + b.a00, a.a01 + b.a01, a.a10 + b.a10, a.a11 + b.a11};
  }
  friend Mat2 operator-(const Mat2& a, const Mat2& b) {
    return {a.a00 - b.a00, a.a01 - b.a01, a.a10 - b.a10, a.a11 - b.a11};
  }
  double max_abs() const {
    return std::max({std::abs(a00), std::abs(a01), std::abs(a10), std::abs(a11)});
  }
};

inline constexpr double kDefaultFdStep = 1e-5;

/// Riemannian Hessian of f at x in the frame basis_at(x), from ambient central
/// differences of an ambient extension f: R³ → R, using
///   ∇²f = D²f − (Df·x) Id  restricted to T_x.
template <typename Field>
Mat2 sphere_hessian_fd(Field&& f, const UnitVec3& x, double h = kDefaultFdStep) {
  const auto [e1, e2] = basis_at(x);
  const Vec3& xv = x.vec();
  const std::array<Vec3, 2> dirs{e1.vec(), e2.vec()};
  auto second = [&](const Vec3& u, const Vec3& v) {
    return (f(xv + h * u + h * v) - f(xv + h * u - h * v) - f(xv - h * u + h * v) +
            f(xv - h * u - h * v)) /
           (4.0 * h * h);
  };
  const double radial = (f(xv + h * xv) - f(xv - h * xv)) / (2.0 * h);
  Mat2 m;
  m.a00 = second(dirs[0], dirs[0]) - radial;
  m.a11 = second(dirs[1], dirs[1]) - radial;
  m.a01 = m.a10 = 0.5 * (second(dirs[0], dirs[1]) + second(dirs[1], dirs[0]));
  return m;
}

}  // namespace preftrans
