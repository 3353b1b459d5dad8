#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>

#include "preftrans/error.hpp"
#include "preftrans/sphere.hpp"

namespace preftrans {

/// Geometry of the two-reflector setup: total optical path L, source-target
/// separation l, and the unit vector e_hat pointing from source to target.
/// The cost only depends on the ratio a = l / L.
class CostParams {
 public:
  CostParams() = default;

  CostParams(double path_length, double separation, const UnitVec3& e_hat)
      : L_(path_length), l_(separation), e_hat_(e_hat) {
    if (!(path_length > 0.0) || !(separation >= 0.0) || !(separation < path_length)) {
      fail(Errc::InvalidScene, "need 0 <= l < L");
    }
  }

  /// Unit path length with l = a.
  static CostParams from_ratio(double a, const UnitVec3& e_hat = UnitVec3()) {
    return CostParams(1.0, a, e_hat);
  }

  double L() const { return L_; }
  double l() const { return l_; }
  double a() const { return l_ / L_; }
  double alpha() const { return 2.0 / (1.0 - a() * a()); }
  const UnitVec3& e_hat() const { return e_hat_; }

  /// a inside (1/3, 1/√2), the range assumed by the y·p̂ ≠ 0 determinant argument.
  bool in_determinant_range() const {
    return a() > 1.0 / 3.0 && a() < std::numbers::sqrt2 / 2.0;
  }

  /// Smallest x·y for which every (x·ê, y·ê) keeps the log argument positive.
  double xi_star2() const { return 1.0 + 2.0 * (a() - 1.0) / (a() + 1.0); }

 private:
  double L_ = 1.0;
  double l_ = 0.5;
  UnitVec3 e_hat_;
};

/// (s, t, u) = (x·y, x·ê, y·ê).
struct CostArgs {
  double s = 1.0;
  double t = 0.0;
  double u = 0.0;
};

inline CostArgs cost_args(const CostParams& params, const Vec3& x, const Vec3& y) {
  const Vec3& e = params.e_hat().vec();
  return {dot(x, y), dot(x, e), dot(y, e)};
}

/// Partial derivatives of F(s, t, u); index 1 = s, 2 = t, 3 = u.
struct DerivStack {
  double F1 = 0.0, F2 = 0.0, F11 = 0.0, F12 = 0.0, F13 = 0.0, F22 = 0.0, F23 = 0.0;
};

inline constexpr double kLogFloor = 1e-14;

namespace detail {

struct CostPieces {
  double alpha, beta_x, beta_y, scale, denom;  // denom = alpha βx βy − 1 + s
};

inline CostPieces pieces(const CostParams& params, const CostArgs& args) {
  const double a = params.a();
  const double alpha = params.alpha();
  const double bx = 1.0 - a * args.t;
  const double by = 1.0 - a * args.u;
  const double scale = alpha * bx * by;
  return {alpha, bx, by, scale, scale - 1.0 + args.s};
}

inline CostPieces checked_pieces(const CostParams& params, const CostArgs& args) {
  const CostPieces pc = pieces(params, args);
  if (!(pc.denom / pc.scale > kLogFloor)) {
    fail(Errc::OutsideOmega, "log argument of the cost is not positive");
  }
  return pc;
}

}  // namespace detail

inline bool in_omega(const CostParams& params, const CostArgs& args) {
  const auto pc = detail::pieces(params, args);
  return args.s > 1.0 - pc.scale && args.s > params.xi_star2();
}

/// log(1 − (1−a²)(1−s) / (2(1−a t)(1−a u)))
inline double eval_cost(const CostParams& params, const CostArgs& args) {
  const auto pc = detail::checked_pieces(params, args);
  return std::log1p(-(1.0 - args.s) / pc.scale);
}

inline DerivStack deriv_stack(const CostParams& params, const CostArgs& args) {
  const auto pc = detail::checked_pieces(params, args);
  const double a = params.a();
  const double D = pc.denom;
  DerivStack d;
  d.F1 = 1.0 / D;
  d.F2 = -(a * (1.0 - args.s) / pc.beta_x) / D;
  d.F11 = -1.0 / (D * D);
  d.F12 = a * pc.alpha * pc.beta_y / (D * D);
  d.F13 = a * pc.alpha * pc.beta_x / (D * D);
  d.F22 = d.F2 * (a / pc.beta_x + a * pc.alpha * pc.beta_y / D);
  d.F23 = d.F2 * (a * pc.alpha * pc.beta_x / D);
  return d;
}

inline double eval_cost(const CostParams& params, const Vec3& x, const Vec3& y) {
  return eval_cost(params, cost_args(params, x, y));
}

/// Tangential gradient in x of c(x, y): projection of F1 y + F2 ê.
inline TangentVector grad_x_cost(const CostParams& params, const UnitVec3& x, const UnitVec3& y) {
  const auto args = cost_args(params, x, y);
  const auto d = deriv_stack(params, args);
  // F1 (y − s x) + F2 (ê − t x), written without cancelling the x components.
  const Vec3 v = d.F1 * (y.vec() - args.s * x.vec()) +
                 d.F2 * (params.e_hat().vec() - args.t * x.vec());
  return {x, v - dot(v, x.vec()) * x.vec()};
}

/// Riemannian Hessian in x of c(x, y), in the frame basis_at(x):
///   F11 yyᵀ + F12 (ê yᵀ + y êᵀ) + F22 ê êᵀ − (s F1 + t F2) Id.
inline Mat2 hessian_xx(const CostParams& params, const UnitVec3& x, const UnitVec3& y) {
  const auto args = cost_args(params, x, y);
  const auto d = deriv_stack(params, args);
  const auto [e1, e2] = basis_at(x);
  const Vec3& e = params.e_hat().vec();
  const double y1 = dot(y.vec(), e1.vec()), y2 = dot(y.vec(), e2.vec());
  const double n1 = dot(e, e1.vec()), n2 = dot(e, e2.vec());
  const double trace_part = args.s * d.F1 + args.t * d.F2;
  Mat2 m;
  m.a00 = d.F11 * y1 * y1 + 2.0 * d.F12 * n1 * y1 + d.F22 * n1 * n1 - trace_part;
  m.a11 = d.F11 * y2 * y2 + 2.0 * d.F12 * n2 * y2 + d.F22 * n2 * n2 - trace_part;
  m.a01 = m.a10 = d.F11 * y1 * y2 + d.F12 * (n1 * y2 + n2 * y1) + d.F22 * n1 * n2;
  return m;
}

/// η-contraction of hessian_xx for a tangent vector η at x.
inline double hessian_xx_contract(const CostParams& params, const UnitVec3& x,
                                  const UnitVec3& y, const Vec3& eta) {
  const auto args = cost_args(params, x, y);
  const auto d = deriv_stack(params, args);
  const double ye = dot(y.vec(), eta);
  const double ee = dot(params.e_hat().vec(), eta);
  return d.F11 * ye * ye + 2.0 * d.F12 * ee * ye + d.F22 * ee * ee -
         (args.s * d.F1 + args.t * d.F2) * dot(eta, eta);
}

/// Any callable c(x, y) on pairs of sphere points.
template <typename C>
concept SphereCost = requires(const C& c, const UnitVec3& x, const UnitVec3& y) {
  { c(x, y) } -> std::convertible_to<double>;
};

/// The point-to-point reflector cost behind the SphereCost contract.
struct PointToPointCost {
  CostParams params;
  double operator()(const UnitVec3& x, const UnitVec3& y) const {
    return eval_cost(params, x.vec(), y.vec());
  }
};

/// −log(1 − x·y), the far-field reflector antenna cost.
struct ReflectorAntennaCost {
  double operator()(const UnitVec3& x, const UnitVec3& y) const {
    const double arg = 1.0 - dot(x.vec(), y.vec());
    if (!(arg > kLogFloor)) fail(Errc::OutsideOmega, "x == y for the antenna cost");
    return -std::log(arg);
  }
};

/// ½ d(x, y)².
struct HalfSquaredGeodesicCost {
  double operator()(const UnitVec3& x, const UnitVec3& y) const {
    const double d = geodesic_distance(x, y);
    return 0.5 * d * d;
  }
};

}  // namespace preftrans
