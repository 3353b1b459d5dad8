#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "preftrans/cost.hpp"
#include "preftrans/mapping.hpp"
#include "preftrans/parallel.hpp"
#include "preftrans/sphere.hpp"

namespace preftrans {

/// Coefficients f1..f11 of the ambient Hessian ∇²ₓₓc at y = T(x, p) in the
/// basis {xxᵀ, x⊗p, x⊗q, ppᵀ, p⊗q, qqᵀ, ê⊗x, ê⊗p, ê⊗q, êêᵀ, Id}, with
/// q = x × p (so |q| = |p|, not unit).
struct FStack {
  std::array<double, 11> f{};

  /// 1-based access matching the usual f1..f11 numbering.
  double operator()(int i) const { return f[static_cast<std::size_t>(i - 1)]; }
  double& operator()(int i) { return f[static_cast<std::size_t>(i - 1)]; }
};

inline FStack f_stack(const UnitVec3& x, const Vec3& p, const CostParams& params) {
  const double pn = norm(p);
  const double xe = dot(x.vec(), params.e_hat().vec());
  double s = 1.0, ye = xe, R2 = 0.0, R3 = 0.0;
  if (pn < kFrameEpsilon) {
    // p → 0 limits: y·p̂/∥p∥ → −1/F1(1, t, t), y·q̂/∥p∥ → 0.
    R2 = -1.0 / deriv_stack(params, {1.0, xe, xe}).F1;
  } else {
    const TangentFrame frame = tangent_frame(x, {x, p});
    const Xi1 v = solve_xi1(make_xi2(frame, pn, params.e_hat()), params);
    s = v.s;
    ye = v.ye;
    R2 = v.yp / pn;
    R3 = v.yq / pn;
  }
  const auto d = deriv_stack(params, {s, xe, ye});
  FStack out;
  out(1) = s * s * d.F11;
  out(2) = s * R2 * d.F11;
  out(3) = s * R3 * d.F11;
  out(4) = R2 * R2 * d.F11;
  out(5) = R2 * R3 * d.F11;
  out(6) = R3 * R3 * d.F11;
  out(7) = s * d.F12;
  out(8) = R2 * d.F12;
  out(9) = R3 * d.F12;
  out(10) = d.F22;
  out(11) = -s * d.F1 - xe * d.F2;
  return out;
}

/// η-contraction of the ambient Hessian rebuilt from an FStack.
inline double f_stack_contract(const FStack& fs, const UnitVec3& x, const Vec3& p,
                               const Vec3& e_hat, const Vec3& eta) {
  const Vec3 q = cross(x.vec(), p);
  const double xh = dot(x.vec(), eta), ph = dot(p, eta), qh = dot(q, eta), eh = dot(e_hat, eta);
  return fs(1) * xh * xh + 2.0 * fs(2) * xh * ph + 2.0 * fs(3) * xh * qh + fs(4) * ph * ph +
         2.0 * fs(5) * ph * qh + fs(6) * qh * qh + 2.0 * fs(7) * eh * xh + 2.0 * fs(8) * eh * ph +
         2.0 * fs(9) * eh * qh + fs(10) * eh * eh + fs(11) * dot(eta, eta);
}

// --- mixed Hessian -------------------------------------------------------------

namespace detail {

// (y·p̂/∥p∥, y·q̂/∥p∥) at tangent coordinates (p1, p2) in basis_at(x).
inline std::array<double, 2> r23(const UnitVec3& x, const std::array<UnitVec3, 2>& basis,
                                 double p1, double p2, const CostParams& params) {
  const Vec3 p = p1 * basis[0].vec() + p2 * basis[1].vec();
  const double pn = norm(p);
  const TangentFrame frame = tangent_frame(x, {x, p});
  const Xi1 v = solve_xi1(make_xi2(frame, pn, params.e_hat()), params);
  return {v.yp / pn, v.yq / pn};
}

}  // namespace detail

/// |det D²ₓᵧc| at (x, T(x, p)) as |R₁| / |det ∇R(p)|, with T = R₁x + R₂p + R₃q
/// and ∇R₂, ∇R₃ taken by central differences in the tangent coordinates of p.
inline double mixed_hessian_analytic(const UnitVec3& x, const Vec3& p, const CostParams& params) {
  const double pn = norm(p);
  if (pn < kFrameEpsilon) {
    const double xe = dot(x.vec(), params.e_hat().vec());
    const double F1 = deriv_stack(params, {1.0, xe, xe}).F1;
    return F1 * F1;  // R₁ = 1, det ∇R = R₂² = 1/F1²
  }
  const auto basis = basis_at(x);
  const double p1 = dot(p, basis[0].vec()), p2 = dot(p, basis[1].vec());
  const double h = 1e-4 * pn;
  const Xi1 v = solve_xi1(make_xi2(tangent_frame(x, {x, p}), pn, params.e_hat()), params);
  const std::array<double, 2> c{v.yp / pn, v.yq / pn};
  const auto a1 = detail::r23(x, basis, p1 + h, p2, params);
  const auto b1 = detail::r23(x, basis, p1 - h, p2, params);
  const auto a2 = detail::r23(x, basis, p1, p2 + h, params);
  const auto b2 = detail::r23(x, basis, p1, p2 - h, params);
  const double R2 = c[0], R3 = c[1];
  const double R2_1 = (a1[0] - b1[0]) / (2 * h), R2_2 = (a2[0] - b2[0]) / (2 * h);
  const double R3_1 = (a1[1] - b1[1]) / (2 * h), R3_2 = (a2[1] - b2[1]) / (2 * h);
  // With (∇Rᵢ)^⊥ = (∂₂Rᵢ, −∂₁Rᵢ):
  //   det ∇R = R₂² + R₃² + R₂∇R₂·p + R₃∇R₃·p + ∥p∥²∇R₂·(∇R₃)^⊥
  //            + R₂(∇R₃)^⊥·p − R₃(∇R₂)^⊥·p
  const double det = R2 * R2 + R3 * R3 + R2 * (R2_1 * p1 + R2_2 * p2) +
                     R3 * (R3_1 * p1 + R3_2 * p2) + pn * pn * (R2_1 * R3_2 - R2_2 * R3_1) +
                     R2 * (R3_2 * p1 - R3_1 * p2) - R3 * (R2_2 * p1 - R2_1 * p2);
  return std::abs(v.s) / std::abs(det);  // R₁ = x·y
}

/// |det| of the 2×2 matrix of mixed second differences of c along orthonormal
/// tangent frames at x and y.
template <SphereCost C>
double mixed_hessian_fd(const C& cost, const UnitVec3& x, const UnitVec3& y, double h = 1e-4) {
  const auto bx = basis_at(x);
  const auto by = basis_at(y);
  auto move = [](const UnitVec3& z, const UnitVec3& dir, double t) {
    return normalize(z.vec() + t * dir.vec());
  };
  Mat2 m;
  double* entries[2][2] = {{&m.a00, &m.a01}, {&m.a10, &m.a11}};
  for (int i = 0; i < 2; ++i) {
    const UnitVec3 xp = move(x, bx[i], h), xm = move(x, bx[i], -h);
    for (int j = 0; j < 2; ++j) {
      const UnitVec3 yp = move(y, by[j], h), ym = move(y, by[j], -h);
      *entries[i][j] = (cost(xp, yp) - cost(xp, ym) - cost(xm, yp) + cost(xm, ym)) / (4 * h * h);
    }
  }
  return std::abs(m.det());
}

inline double mixed_hessian_fd(const UnitVec3& x, const UnitVec3& y, const CostParams& params,
                               double h = 1e-4) {
  return mixed_hessian_fd(PointToPointCost{params}, x, y, h);
}

// --- cost-sectional curvature ---------------------------------------------------

struct CurvatureSample {
  UnitVec3 x;
  Vec3 p;
  Vec3 xi;
  Vec3 eta;
  double value = 0.0;
};

inline constexpr double kCscStep = 1e-4;

namespace detail {

struct DirectionalDerivs {
  FStack d1;  // D fᵢ · ξ̂
  FStack d2;  // ⟨D² fᵢ ξ̂, ξ̂⟩
};

// Five-point stencil along unit direction u, Richardson-extrapolated.
inline DirectionalDerivs directional_derivs(const UnitVec3& x, const Vec3& p, const Vec3& u,
                                            const CostParams& params, double h) {
  const FStack f0 = f_stack(x, p, params);
  const FStack fp1 = f_stack(x, p + h * u, params);
  const FStack fm1 = f_stack(x, p - h * u, params);
  const FStack fp2 = f_stack(x, p + 2 * h * u, params);
  const FStack fm2 = f_stack(x, p - 2 * h * u, params);
  DirectionalDerivs out;
  for (std::size_t i = 0; i < 11; ++i) {
    const double g1h = (fp1.f[i] - fm1.f[i]) / (2 * h);
    const double g12h = (fp2.f[i] - fm2.f[i]) / (4 * h);
    const double g2h = (fp1.f[i] - 2 * f0.f[i] + fm1.f[i]) / (h * h);
    const double g22h = (fp2.f[i] - 2 * f0.f[i] + fm2.f[i]) / (4 * h * h);
    out.d1.f[i] = (4 * g1h - g12h) / 3;
    out.d2.f[i] = (4 * g2h - g22h) / 3;
  }
  return out;
}

}  // namespace detail

/// Σ D_{pᵢpⱼ}(∇²ₓₓc)_{kl} ξᵢξⱼηₖηₗ for ξ ⊥ η tangent at x, in the reduced form
/// that drops every term carrying x·ξ, x·η or ξ·η.
inline double csc_evaluate(const CurvatureSample& smp, const CostParams& params,
                           double h = kCscStep) {
  const UnitVec3& x = smp.x;
  const double xi_n = norm(smp.xi);
  if (xi_n == 0.0 || norm(smp.eta) == 0.0) return 0.0;
  const Vec3 u = smp.xi / xi_n;
  const double pn = norm(smp.p);
  // Keep the stencil on one side of the origin where the fᵢ are only Lipschitz.
  const double step = pn > 0.0 ? std::min(h, 0.125 * pn) : h;
  const auto dd = detail::directional_derivs(x, smp.p, u, params, step);
  const FStack f = f_stack(x, smp.p, params);
  const double xi2 = xi_n * xi_n;
  auto D2 = [&](int i) { return dd.d2(i) * xi2; };
  auto D1 = [&](int i) { return dd.d1(i) * xi_n; };

  const Vec3 q = cross(x.vec(), smp.p);
  const Vec3& eta = smp.eta;
  const double p_eta = dot(smp.p, eta), q_eta = dot(q, eta);
  const double e_eta = dot(params.e_hat().vec(), eta);
  const double rot = dot(eta, cross(x.vec(), smp.xi));  // η·(x × ξ)
  const double eta2 = dot(eta, eta);

  return D2(4) * p_eta * p_eta + 2 * D2(5) * p_eta * q_eta + 4 * D1(5) * p_eta * rot +
         D2(6) * q_eta * q_eta + 4 * D1(6) * q_eta * rot + 2 * f(6) * xi2 * eta2 +
         2 * D2(8) * e_eta * p_eta + 2 * D2(9) * e_eta * q_eta + 4 * D1(9) * e_eta * rot +
         D2(10) * e_eta * e_eta + D2(11) * eta2;
}

/// Two-term form valid at x = −ê: ⟨D²f₄ξ,ξ⟩(p·η)² + ⟨D²f₁₁ξ,ξ⟩|η|².
inline double csc_reduced_axis(const CurvatureSample& smp, const CostParams& params,
                               double h = kCscStep) {
  const double xi_n = norm(smp.xi);
  if (xi_n == 0.0) return 0.0;
  const double pn = norm(smp.p);
  const double step = pn > 0.0 ? std::min(h, 0.125 * pn) : h;
  const auto dd = detail::directional_derivs(smp.x, smp.p, smp.xi / xi_n, params, step);
  const double p_eta = dot(smp.p, smp.eta);
  return xi_n * xi_n * (dd.d2(4) * p_eta * p_eta + dd.d2(11) * dot(smp.eta, smp.eta));
}

// --- f11 along the axis x = −ê ------------------------------------------------------

/// x·y at x = −ê as a function of ∥p∥.
inline double axis_xy(double a, double pn) {
  const double rho2 = std::pow(pn * (1 + a) / (1 - a), 2);
  return (1 - rho2) / (1 + rho2);
}

inline double axis_f11(double a, double pn) {
  const double s = axis_xy(a, pn);
  return -((s + a) / (1 + a)) / ((2 / (1 - a)) * (1 + a * s) - 1 + s);
}

/// Right end of the profile: x·y reaches ξ*₂ or ∥p∥ reaches p₁, whichever first.
inline double axis_p_max(double a) {
  const double xi2 = 1.0 + 2.0 * (a - 1.0) / (a + 1.0);
  const double rho = std::sqrt((1 - xi2) / (1 + xi2));
  const double p_xi = rho * (1 - a) / (1 + a);
  const double p1 = a > 0 ? (1 - a) / (2 * a) : std::numeric_limits<double>::infinity();
  return std::min(p_xi, p1);
}

struct ProfilePoint {
  double p_norm = 0.0;
  double f11 = 0.0;
};

inline std::vector<ProfilePoint> f11_profile(double a, int n) {
  if (!(a > 0.0 && a < 1.0)) fail(Errc::ConfigError, "f11_profile needs 0 < a < 1");
  if (n < 2) fail(Errc::ConfigError, "f11_profile needs n >= 2");
  const double p_max = axis_p_max(a);
  std::vector<ProfilePoint> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double pn = p_max * k / (n - 1);
    out[static_cast<std::size_t>(k)] = {pn, axis_f11(a, pn)};
  }
  return out;
}

/// Central second difference at ∥p∥ = 0 from the first two samples, using
/// that f11 is even in ∥p∥.
inline double profile_second_difference_at_zero(const std::vector<ProfilePoint>& prof) {
  if (prof.size() < 2) fail(Errc::ConfigError, "profile too short");
  const double h = prof[1].p_norm - prof[0].p_norm;
  return 2.0 * (prof[1].f11 - prof[0].f11) / (h * h);
}

// --- scan -------------------------------------------------------------------------

struct GridSpec {
  int n_x = 16;
  int n_dir = 16;
  int n_rad = 16;
  int n_pairs = 4;
};

inline constexpr double kAwTolerance = 1e-8;
inline constexpr const char* kCscSignConvention =
    "raw reduced contraction sum; Aw requires sum <= 0, a positive sample violates Aw";

struct MtwReport {
  double gamma = 0.0;
  std::size_t samples = 0;
  double a2_min_abs = std::numeric_limits<double>::infinity();
  double a2_max_rel_gap = 0.0;  // analytic vs FD mixed Hessian
  double a1_min_separation = std::numeric_limits<double>::infinity();
  double csc_min = std::numeric_limits<double>::infinity();
  double csc_max = -std::numeric_limits<double>::infinity();
  bool aw_holds = true;
  std::optional<CurvatureSample> counterexample;
  std::optional<CurvatureSample> axis_counterexample;  // worst sample at x = −ê
  std::string sign_convention = kCscSignConvention;
};

/// Grid points x: polar angles π·i/(n−1) from ê (both poles included) with
/// golden-angle azimuths.
inline std::vector<UnitVec3> scan_points(const UnitVec3& e_hat, int n) {
  std::vector<UnitVec3> xs;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    xs.push_back(from_polar(e_hat, std::numbers::pi * i / (n - 1), golden * i));
  }
  return xs;
}

inline MtwReport mtw_scan(const CostParams& params, const DomainBounds& bounds, double gamma,
                          const GridSpec& grid = {}) {
  if (!(gamma > 0.0) || !(gamma < bounds.p_star)) {
    fail(Errc::GammaOutOfRange, "need 0 < gamma < p*");
  }
  const auto xs = scan_points(params.e_hat(), grid.n_x);
  const UnitVec3 axis = -params.e_hat();

  std::vector<MtwReport> parts(xs.size());
  parallel_for(xs.size(), [&](std::size_t ix) {
    const UnitVec3& x = xs[ix];
    const bool on_axis = geodesic_distance(x, axis) < 1e-12;
    MtwReport& r = parts[ix];
    const auto [e1, e2] = basis_at(x, params.e_hat().vec());
    std::vector<UnitVec3> images;
    for (int j = 0; j < grid.n_dir; ++j) {
      const double psi = 2 * std::numbers::pi * j / grid.n_dir;
      const Vec3 dir = std::cos(psi) * e1.vec() + std::sin(psi) * e2.vec();
      for (int k = 1; k <= grid.n_rad; ++k) {
        const Vec3 p = (gamma * k / grid.n_rad) * dir;
        const UnitVec3 y = forward_explicit(x, {x, p}, params);
        images.push_back(y);
        const double an = mixed_hessian_analytic(x, p, params);
        const double fd = mixed_hessian_fd(x, y, params);
        r.a2_min_abs = std::min({r.a2_min_abs, an, fd});
        r.a2_max_rel_gap = std::max(r.a2_max_rel_gap, std::abs(an - fd) / std::abs(an));
        const Vec3 q = cross(x.vec(), dir);
        for (int m = 0; m < grid.n_pairs; ++m) {
          const double th = std::numbers::pi * m / grid.n_pairs;
          const Vec3 xi = std::cos(th) * dir + std::sin(th) * q;
          CurvatureSample smp{x, p, xi, cross(x.vec(), xi), 0.0};
          smp.value = csc_evaluate(smp, params);
          ++r.samples;
          r.csc_min = std::min(r.csc_min, smp.value);
          if (smp.value > r.csc_max) {
            r.csc_max = smp.value;
            r.counterexample = smp;
          }
          if (on_axis && (!r.axis_counterexample || smp.value > r.axis_counterexample->value)) {
            r.axis_counterexample = smp;
          }
        }
      }
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
      for (std::size_t j = i + 1; j < images.size(); ++j) {
        r.a1_min_separation = std::min(r.a1_min_separation, norm(images[i].vec() - images[j].vec()));
      }
    }
  });

  MtwReport out;
  out.gamma = gamma;
  for (const MtwReport& r : parts) {
    out.samples += r.samples;
    out.a2_min_abs = std::min(out.a2_min_abs, r.a2_min_abs);
    out.a2_max_rel_gap = std::max(out.a2_max_rel_gap, r.a2_max_rel_gap);
    out.a1_min_separation = std::min(out.a1_min_separation, r.a1_min_separation);
    out.csc_min = std::min(out.csc_min, r.csc_min);
    if (r.csc_max > out.csc_max) {
      out.csc_max = r.csc_max;
      out.counterexample = r.counterexample;
    }
    if (r.axis_counterexample &&
        (!out.axis_counterexample || r.axis_counterexample->value > out.axis_counterexample->value)) {
      out.axis_counterexample = r.axis_counterexample;
    }
  }
  out.aw_holds = !(out.csc_max > kAwTolerance);
  if (out.aw_holds) out.counterexample.reset();
  return out;
}

/// Every curvature sample of the mtw_scan grid, in grid order.
inline std::vector<CurvatureSample> csc_scan(const CostParams& params, const DomainBounds& bounds,
                                             double gamma, const GridSpec& grid = {}) {
  if (!(gamma > 0.0) || !(gamma < bounds.p_star)) {
    fail(Errc::GammaOutOfRange, "need 0 < gamma < p*");
  }
  const auto xs = scan_points(params.e_hat(), grid.n_x);
  const std::size_t per_x = static_cast<std::size_t>(grid.n_dir * grid.n_rad * grid.n_pairs);
  std::vector<CurvatureSample> out(xs.size() * per_x);
  parallel_for(xs.size(), [&](std::size_t ix) {
    const UnitVec3& x = xs[ix];
    const auto [e1, e2] = basis_at(x, params.e_hat().vec());
    std::size_t slot = ix * per_x;
    for (int j = 0; j < grid.n_dir; ++j) {
      const double psi = 2 * std::numbers::pi * j / grid.n_dir;
      const Vec3 dir = std::cos(psi) * e1.vec() + std::sin(psi) * e2.vec();
      const Vec3 q = cross(x.vec(), dir);
      for (int k = 1; k <= grid.n_rad; ++k) {
        const Vec3 p = (gamma * k / grid.n_rad) * dir;
        for (int m = 0; m < grid.n_pairs; ++m) {
          const double th = std::numbers::pi * m / grid.n_pairs;
          const Vec3 xi = std::cos(th) * dir + std::sin(th) * q;
          CurvatureSample smp{x, p, xi, cross(x.vec(), xi), 0.0};
          smp.value = csc_evaluate(smp, params);
          out[slot++] = smp;
        }
      }
    }
  });
  return out;
}

}  // namespace preftrans
