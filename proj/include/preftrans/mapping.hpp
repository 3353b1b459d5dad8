#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "preftrans/cost.hpp"
#include "preftrans/error.hpp"
#include "preftrans/parallel.hpp"
#include "preftrans/sphere.hpp"

namespace preftrans {

/// Solved-for quantities (x·y, y·p̂, y·q̂, y·ê).
struct Xi1 {
  double s = 1.0;
  double yp = 0.0;
  double yq = 0.0;
  double ye = 0.0;
};

/// Given quantities (∥p∥, x·ê, ê·p̂, ê·q̂).
struct Xi2 {
  double pn = 0.0;
  double xe = 0.0;
  double ep = 0.0;
  double eq = 0.0;
};

inline Xi2 make_xi2(const TangentFrame& frame, double pn, const UnitVec3& e_hat) {
  return {pn, dot(frame.x.vec(), e_hat.vec()), dot(e_hat.vec(), frame.p_hat.vec()),
          dot(e_hat.vec(), frame.q_hat.vec())};
}

/// Largest admissible ∥p∥ for a given x·ê; infinite when a = 0.
inline double p1_at(const CostParams& params, double xe) {
  const double a = params.a();
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - a * a) / (2.0 * a * (1.0 - a * xe));
}

/// Coefficients of the affine forms y·p̂ = α₁ + β₁ s and y·q̂ = α₂ + β₂ s.
struct AuxCoeffs {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double alpha1 = 0.0;
  double beta1 = 0.0;
  double alpha2 = 0.0;
  double beta2 = 0.0;
  double denom = 1.0;  // 1 − ∥p∥ a α β (ê·p̂)
};

inline constexpr double kDenomFloor = 1e-10;

inline AuxCoeffs aux_coeffs(const Xi2& xi2, const CostParams& params) {
  const double a = params.a();
  if (a > 0.0 && xi2.pn >= p1_at(params, xi2.xe)) {
    fail(Errc::BeyondP1, "|p| at or beyond p1 for this x.e");
  }
  AuxCoeffs c;
  c.alpha = params.alpha();
  c.beta = 1.0 - a * xi2.xe;
  c.gamma1 = 1.0 + a * a * c.alpha * xi2.eq * xi2.eq;
  c.gamma2 = a * xi2.ep / c.beta;
  c.denom = 1.0 - xi2.pn * a * c.alpha * c.beta * xi2.ep;
  if (!(c.denom >= kDenomFloor)) fail(Errc::BeyondP1, "coefficient denominator vanishes");
  c.alpha1 = (xi2.pn * (c.gamma1 - c.alpha * c.beta) + c.gamma2) / c.denom;
  c.beta1 = (xi2.pn * (a * c.alpha * c.beta * xi2.xe - c.gamma1) - c.gamma2) / c.denom;
  c.alpha2 = a * xi2.eq / c.beta;
  c.beta2 = -c.alpha2;
  return c;
}

namespace detail {

// α₁ + β₁ = −m. Writing w = 1 − s turns the unit-norm row into
//   A w² − 2(1 − β₁ m) w + m² = 0,   A = 1 + β₁² + β₂²,
// whose small root is the branch with s → 1 as ∥p∥ → 0.
inline double sum_slope(const Xi2& xi2, const AuxCoeffs& c) {
  return xi2.pn * c.alpha * c.beta * c.beta / c.denom;
}

}  // namespace detail

/// B² − AC of the quadratic in x·y, computed in the cancellation-free form.
inline double discriminant(const Xi2& xi2, const AuxCoeffs& c) {
  const double m = detail::sum_slope(xi2, c);
  const double A = 1.0 + c.beta1 * c.beta1 + c.beta2 * c.beta2;
  const double lin = 1.0 - c.beta1 * m;
  return lin * lin - A * m * m;
}

inline double discriminant(const Xi2& xi2, const CostParams& params) {
  return discriminant(xi2, aux_coeffs(xi2, params));
}

/// Result of the closed-form solve; `status` is meaningful only when !ok.
struct ExplicitSolve {
  Xi1 xi1;
  double disc = 1.0;
  bool ok = false;
  Errc status = Errc::NoConvergence;
};

/// Non-throwing closed-form solve of the four-equation system for ξ₁.
inline ExplicitSolve try_solve_xi1(const Xi2& xi2, const CostParams& params) {
  ExplicitSolve out;
  if (xi2.pn < kFrameEpsilon) {
    out.xi1 = {1.0, 0.0, 0.0, xi2.xe};
    out.ok = true;
    return out;
  }
  const double a = params.a();
  if (a > 0.0 && xi2.pn >= p1_at(params, xi2.xe)) {
    out.status = Errc::BeyondP1;
    return out;
  }
  const double denom = 1.0 - xi2.pn * a * params.alpha() * (1.0 - a * xi2.xe) * xi2.ep;
  if (!(denom >= kDenomFloor)) {
    out.status = Errc::BeyondP1;
    return out;
  }
  const AuxCoeffs c = aux_coeffs(xi2, params);
  const double m = detail::sum_slope(xi2, c);
  const double lin = 1.0 - c.beta1 * m;
  const double A = 1.0 + c.beta1 * c.beta1 + c.beta2 * c.beta2;
  out.disc = lin * lin - A * m * m;
  if (out.disc < 0.0) {
    out.status = Errc::NegativeDiscriminant;
    return out;
  }
  const double root_den = lin + std::sqrt(out.disc);
  if (!(root_den > 0.0)) {
    out.status = Errc::NegativeDiscriminant;
    return out;
  }
  const double w = m * m / root_den;
  Xi1& r = out.xi1;
  r.s = 1.0 - w;
  r.yp = -m - c.beta1 * w;
  r.yq = c.alpha2 * w;
  r.ye = r.s * xi2.xe + r.yp * xi2.ep + r.yq * xi2.eq;
  const auto pc = detail::pieces(params, {r.s, xi2.xe, r.ye});
  if (!(pc.denom / pc.scale > kLogFloor)) {
    out.status = Errc::OutsideOmega;
    return out;
  }
  out.ok = true;
  return out;
}

inline Xi1 solve_xi1(const Xi2& xi2, const CostParams& params) {
  const auto r = try_solve_xi1(xi2, params);
  if (!r.ok) fail(r.status, "explicit forward solve failed");
  return r.xi1;
}

inline UnitVec3 assemble_y(const TangentFrame& f, const Xi1& xi1) {
  return normalize(xi1.s * f.x.vec() + xi1.yp * f.p_hat.vec() + xi1.yq * f.q_hat.vec());
}

/// y = T(x, p) by the closed-form solve; p below the frame threshold maps to x.
inline UnitVec3 forward_explicit(const UnitVec3& x, const TangentVector& p,
                                 const CostParams& params) {
  if (p.length() < kFrameEpsilon) return x;
  const TangentFrame frame = tangent_frame(x, p);
  return assemble_y(frame, solve_xi1(make_xi2(frame, p.length(), params.e_hat()), params));
}

// --- Newton oracle ---------------------------------------------------------

inline std::array<double, 4> residual_H(const Xi1& v, const Xi2& g, const CostParams& params) {
  const auto d = deriv_stack(params, {v.s, g.xe, v.ye});
  return {g.pn + d.F1 * v.yp + d.F2 * g.ep,
          d.F1 * v.yq + d.F2 * g.eq,
          v.s * v.s + v.yp * v.yp + v.yq * v.yq - 1.0,
          v.s * g.xe + v.yp * g.ep + v.yq * g.eq - v.ye};
}

/// D_{ξ₁}H, rows as in residual_H, columns (s, yp, yq, ye).
inline Eigen::Matrix4d jacobian_H(const Xi1& v, const Xi2& g, const CostParams& params) {
  const auto d = deriv_stack(params, {v.s, g.xe, v.ye});
  Eigen::Matrix4d J;
  J << d.F11 * v.yp + d.F12 * g.ep, d.F1, 0.0, d.F13 * v.yp + d.F23 * g.ep,
      d.F11 * v.yq + d.F12 * g.eq, 0.0, d.F1, d.F13 * v.yq + d.F23 * g.eq,
      2.0 * v.s, 2.0 * v.yp, 2.0 * v.yq, 0.0,
      g.xe, g.ep, g.eq, -1.0;
  return J;
}

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 50;
};

struct NewtonResult {
  Xi1 xi1;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline double norm4(const std::array<double, 4>& r) {
  return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] + r[3] * r[3]);
}

inline std::optional<double> residual_norm(const Xi1& v, const Xi2& g, const CostParams& params) {
  const auto pc = pieces(params, {v.s, g.xe, v.ye});
  if (!(pc.denom / pc.scale > kLogFloor)) return std::nullopt;
  return norm4(residual_H(v, g, params));
}

// Damped Newton at fixed ξ₂; returns nullopt when it stalls.
inline std::optional<NewtonResult> newton_stage(Xi1 v, const Xi2& g, const CostParams& params,
                                                const NewtonOptions& opt, int budget) {
  auto r = residual_norm(v, g, params);
  if (!r) return std::nullopt;
  int it = 0;
  while (*r >= opt.tol) {
    if (it >= budget) return std::nullopt;
    const auto res = residual_H(v, g, params);
    const Eigen::Matrix4d J = jacobian_H(v, g, params);
    const Eigen::FullPivLU<Eigen::Matrix4d> lu(J);
    if (lu.rank() < 4 || std::abs(lu.determinant()) < 1e-14) {
      fail(Errc::SingularJacobian, "D_xi1 H is singular");
    }
    const Eigen::Vector4d step = lu.solve(Eigen::Vector4d(res[0], res[1], res[2], res[3]));
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, lambda *= 0.5) {
      const Xi1 trial{v.s - lambda * step[0], v.yp - lambda * step[1], v.yq - lambda * step[2],
                      v.ye - lambda * step[3]};
      const auto rt = residual_norm(trial, g, params);
      if (rt && *rt < *r) {
        v = trial;
        r = rt;
        accepted = true;
        break;
      }
    }
    ++it;
    if (!accepted) {
      // Already at roundoff level: accept if close enough, else give up.
      if (*r < 100.0 * opt.tol) break;
      return std::nullopt;
    }
  }
  return NewtonResult{v, it, *r};
}

}  // namespace detail

/// Newton solve of H(ξ₁, ξ₂) = 0 from `init`, falling back to continuation in
/// ∥p∥ from the p = 0 state when a direct solve does not converge.
inline NewtonResult solve_xi1_newton(const Xi2& g, const CostParams& params,
                                     std::optional<Xi1> init = std::nullopt,
                                     const NewtonOptions& opt = {}) {
  const Xi1 start = init.value_or(Xi1{1.0, 0.0, 0.0, g.xe});
  if (auto r = detail::newton_stage(start, g, params, opt, opt.max_iter)) return *r;
  for (int stages : {4, 16, 64}) {
    Xi1 v{1.0, 0.0, 0.0, g.xe};
    int total = 0;
    bool ok = true;
    double res = 0.0;
    for (int k = 1; k <= stages && ok; ++k) {
      Xi2 gk = g;
      gk.pn = g.pn * k / stages;
      auto r = detail::newton_stage(v, gk, params, opt, opt.max_iter);
      if (!r) {
        ok = false;
      } else {
        v = r->xi1;
        total += r->iterations;
        res = r->residual;
      }
    }
    if (ok) return {v, total, res};
  }
  fail(Errc::NoConvergence, "Newton did not converge");
}

inline UnitVec3 forward_newton(const UnitVec3& x, const TangentVector& p, const CostParams& params,
                               std::optional<Xi1> init = std::nullopt) {
  if (p.length() < kFrameEpsilon) return x;
  const TangentFrame frame = tangent_frame(x, p);
  const Xi2 g = make_xi2(frame, p.length(), params.e_hat());
  return assemble_y(frame, solve_xi1_newton(g, params, init).xi1);
}

// --- inverse ----------------------------------------------------------------

inline constexpr double kYpFloor = 1e-12;

/// p such that forward_explicit(x, p) = y, i.e. p = −∇ₓc(x, y).
inline TangentVector inverse_map(const UnitVec3& x, const UnitVec3& y, const CostParams& params) {
  if (geodesic_distance(x, y) < kFrameEpsilon) return {x, Vec3{}};
  const CostArgs args = cost_args(params, x, y);
  if (!in_omega(params, args)) fail(Errc::OutsideOmega, "(x.y, x.e, y.e) outside Omega");
  const TangentVector g = grad_x_cost(params, x, y);
  const TangentVector p{x, -1.0 * g.vec};
  const double pn = p.length();
  if (pn < kFrameEpsilon || std::abs(dot(y.vec(), p.vec)) < kYpFloor * pn) {
    fail(Errc::YPHatZero, "y.p_hat vanishes with y != x");
  }
  return p;
}

/// Recovers ξ₂ from ξ₁ and x·ê using the three inverse relations
///   ê·q̂ = (y·q̂)(1 − a x·ê) / (a(1 − x·y)),
///   ê·p̂ = (y·ê − (x·y)(x·ê) − (y·q̂)(ê·q̂)) / (y·p̂),
///   ∥p∥ = (−y·p̂ + a(1 − x·y)(ê·p̂)/(1 − a x·ê)) / D.
/// Requires a > 0 and x·y < 1.
inline Xi2 solve_xi2(const Xi1& v, double xe, const CostParams& params) {
  const double a = params.a();
  if (std::abs(v.yp) < kYpFloor) fail(Errc::YPHatZero, "y.p_hat vanishes");
  if (!(a > 0.0) || !(v.s < 1.0)) fail(Errc::DegenerateInput, "inverse relations need a > 0, x.y < 1");
  const double beta = 1.0 - a * xe;
  const auto pc = detail::checked_pieces(params, {v.s, xe, v.ye});
  Xi2 g;
  g.xe = xe;
  g.eq = v.yq * beta / (a * (1.0 - v.s));
  g.ep = (v.ye - v.s * xe - v.yq * g.eq) / v.yp;
  g.pn = (-v.yp + a * (1.0 - v.s) * g.ep / beta) / pc.denom;
  return g;
}

// --- domain bounds -----------------------------------------------------------

struct DomainBounds {
  double p1 = 0.0;
  std::optional<double> p2;
  std::optional<double> p3;
  double p_tilde = 0.0;
  double p_tilde1 = 0.0;
  double p_tilde2 = 0.0;
  double p_star = 0.0;
  double xi_star1 = -1.0;
  double xi_star2 = -1.0;
  double xi_star = -1.0;

  /// Geodesic radius of the support ball, arccos(ξ*)/2.
  double support_radius() const { return 0.5 * std::acos(std::clamp(xi_star, -1.0, 1.0)); }
};

inline constexpr int kDefaultBoundsGrid = 64;
inline constexpr double kBisectTol = 1e-10;
inline constexpr double kBoundShrink = 1e-6;

namespace detail {

// Upper end of ∥p∥ scans when a = 0 makes p₁ infinite.
inline constexpr double kScanCap = 50.0;
inline constexpr int kRaySteps = 256;

inline std::vector<Xi2> bound_rays(int grid_n) {
  std::vector<Xi2> rays;
  rays.reserve(static_cast<std::size_t>(grid_n) * grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double xe = -1.0 + 2.0 * i / (grid_n - 1);
    const double r = std::sqrt(std::max(0.0, 1.0 - xe * xe));
    for (int j = 0; j < grid_n; ++j) {
      const double psi = 2.0 * std::numbers::pi * j / grid_n;
      rays.push_back({0.0, xe, r * std::cos(psi), r * std::sin(psi)});
    }
  }
  return rays;
}

inline ExplicitSolve at(Xi2 g, double pn, const CostParams& params) {
  g.pn = pn;
  return try_solve_xi1(g, params);
}

// First pn in (0, p_max] where pred(pn) switches from false to true; bisected.
template <typename Pred>
std::optional<double> first_crossing(double p_max, Pred&& pred) {
  double lo = 0.0;
  for (int k = 1; k <= kRaySteps; ++k) {
    double hi = p_max * k / kRaySteps;
    if (pred(hi)) {
      while (hi - lo > kBisectTol) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return hi;
    }
    lo = hi;
  }
  return std::nullopt;
}

}  // namespace detail

/// Scans rays in physical ξ₂ space (x·ê ∈ [−1,1] × azimuth of p̂ around x,
/// grid_n points each) for the bounds of the admissible ∥p∥ and x·y ranges.
inline DomainBounds domain_bounds(const CostParams& params, int grid_n = kDefaultBoundsGrid) {
  if (grid_n < 32) fail(Errc::ConfigError, "domain_bounds needs grid_n >= 32");
  DomainBounds b;
  b.xi_star2 = params.xi_star2();
  b.p1 = p1_at(params, -1.0);
  const double scan_max = std::isfinite(b.p1) ? b.p1 * (1.0 - 1e-9) : detail::kScanCap;

  const auto rays = detail::bound_rays(grid_n);
  const std::size_t n = rays.size();

  // Pass 1: discriminant and y·p̂ sign changes.
  std::vector<std::optional<double>> p2_ray(n), p3_ray(n);
  parallel_for(n, [&](std::size_t i) {
    const Xi2& g = rays[i];
    auto bad_disc = [&](double pn) {
      const auto r = detail::at(g, pn, params);
      return !r.ok && r.status == Errc::NegativeDiscriminant;
    };
    p2_ray[i] = detail::first_crossing(scan_max, bad_disc);
    const double p_lim = p2_ray[i].value_or(scan_max);
    auto yp_nonneg = [&](double pn) {
      const auto r = detail::at(g, pn, params);
      return !r.ok || r.xi1.yp >= 0.0;
    };
    p3_ray[i] = detail::first_crossing(p_lim, yp_nonneg);
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (p2_ray[i]) b.p2 = std::min(b.p2.value_or(*p2_ray[i]), *p2_ray[i]);
    if (p3_ray[i]) b.p3 = std::min(b.p3.value_or(*p3_ray[i]), *p3_ray[i]);
  }
  if (b.p2) b.p2 = *b.p2 * (1.0 - kBoundShrink);
  if (b.p3) b.p3 = *b.p3 * (1.0 - kBoundShrink);
  b.p_tilde = b.p2 ? *b.p2 : scan_max;
  b.p_tilde1 = b.p3 ? std::min(b.p_tilde, *b.p3) : b.p_tilde;

  // Pass 2: smallest x·y reached on [0, p̃₁] along every ray.
  std::vector<double> s_min(n, 1.0);
  parallel_for(n, [&](std::size_t i) {
    double lo = 1.0;
    for (int k = 1; k <= detail::kRaySteps; ++k) {
      const auto r = detail::at(rays[i], b.p_tilde1 * k / detail::kRaySteps, params);
      if (r.ok) lo = std::min(lo, r.xi1.s);
    }
    s_min[i] = lo;
  });
  b.xi_star1 = std::min(1.0, *std::max_element(s_min.begin(), s_min.end()) + kBoundShrink);
  b.xi_star = std::max(b.xi_star1, b.xi_star2);

  // Pass 3: largest ∥p∥ keeping x·y ≥ ξ* on every ray.
  std::vector<double> p_cross(n, b.p_tilde1);
  parallel_for(n, [&](std::size_t i) {
    auto below = [&](double pn) {
      const auto r = detail::at(rays[i], pn, params);
      return !r.ok || r.xi1.s < b.xi_star;
    };
    if (auto c = detail::first_crossing(b.p_tilde1, below)) p_cross[i] = *c;
  });
  b.p_tilde2 = *std::min_element(p_cross.begin(), p_cross.end()) * (1.0 - kBoundShrink);
  b.p_star = std::min(b.p_tilde1, b.p_tilde2);
  return b;
}

// --- D_gamma -----------------------------------------------------------------

struct DGammaRow {
  double x_theta = 0.0;   // polar angle of x from ê
  double x_phi = 0.0;     // azimuth of x in basis_at(ê)
  double phat_angle = 0.0;  // azimuth of p̂ in basis_at(x, ê)
  double radius_rad = 0.0;  // arccos(x·y) at ∥p∥ = γ
};

/// Boundary of V_x for grid_n × grid_n points x and grid_n directions p̂.
inline std::vector<DGammaRow> build_d_gamma(const CostParams& params, const DomainBounds& bounds,
                                            double gamma, int grid_n) {
  if (!(gamma > 0.0) || !(gamma < bounds.p_star)) {
    fail(Errc::GammaOutOfRange, "need 0 < gamma < p*");
  }
  if (grid_n < 2) fail(Errc::ConfigError, "build_d_gamma needs grid_n >= 2");
  const std::size_t per_x = static_cast<std::size_t>(grid_n);
  const std::size_t nx = per_x * per_x;
  std::vector<DGammaRow> rows(nx * per_x);
  parallel_for(nx, [&](std::size_t ix) {
    const double theta = std::numbers::pi * static_cast<double>(ix / per_x) / (grid_n - 1);
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(ix % per_x) / grid_n;
    const UnitVec3 x = from_polar(params.e_hat(), theta, phi);
    const auto [e1, e2] = basis_at(x, params.e_hat().vec());
    for (std::size_t k = 0; k < per_x; ++k) {
      const double psi = 2.0 * std::numbers::pi * static_cast<double>(k) / grid_n;
      const TangentVector p{x, gamma * (std::cos(psi) * e1.vec() + std::sin(psi) * e2.vec())};
      const UnitVec3 y = forward_explicit(x, p, params);
      rows[ix * per_x + k] = {theta, phi, psi, geodesic_distance(x, y)};
    }
  });
  return rows;
}

}  // namespace preftrans
