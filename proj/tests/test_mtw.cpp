#include <gtest/gtest.h>

#include <cmath>

#include "preftrans/mapping.hpp"
#include "preftrans/mtw.hpp"
#include "preftrans/rng.hpp"

using namespace preftrans;

namespace {

const UnitVec3 kE = UnitVec3::unchecked({0, 0, 1});

// Orthonormal tangent pair (ξ, η) at x rotated by angle th.
std::pair<Vec3, Vec3> tangent_pair(const UnitVec3& x, double th) {
  const auto [e1, e2] = basis_at(x);
  const Vec3 xi = std::cos(th) * e1.vec() + std::sin(th) * e2.vec();
  return {xi, cross(x.vec(), xi)};
}

// Second derivative in t of ∇²ₓₓc(x, T(x, p + tξ))(η, η), built only from the
// cost Hessian and the forward map; no fᵢ stack involved.
double nested_fd_csc(const UnitVec3& x, const Vec3& p, const Vec3& xi, const Vec3& eta, const CostParams& params,
                     double h) {
  auto g = [&](double t) {
    const UnitVec3 y = forward_explicit(x, {x, p + t * xi}, params);
    return hessian_xx_contract(params, x, y, eta);
  };
  return (-g(2 * h) + 16 * g(h) - 30 * g(0) + 16 * g(-h) - g(-2 * h)) / (12 * h * h);
}

}  // namespace

TEST(MixedHessian, AnalyticMatchesFd) {
  Rng rng(41);
  for (double a : {0.4, 0.5}) {
    const auto params = CostParams::from_ratio(a, kE);
    const double p_max = domain_bounds(params).p_star;
    for (int k = 0; k < 1000; ++k) {
      const UnitVec3 x = rng.on_sphere();
      const Vec3 p = rng.tangent(x, p_max);
      if (norm(p) < 1e-3 * p_max) continue;
      const UnitVec3 y = forward_explicit(x, {x, p}, params);
      const double an = mixed_hessian_analytic(x, p, params);
      EXPECT_NEAR(mixed_hessian_fd(x, y, params), an, 1e-4 * an);
    }
  }
}

// At p = 0 the mixed Hessian determinant reduces to F₁².
TEST(MixedHessian, ZeroMomentumLimit) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const UnitVec3 x = normalize({0.3, 0.1, -0.6});
  const auto d = deriv_stack(params, cost_args(params, x, x));
  EXPECT_NEAR(mixed_hessian_analytic(x, {}, params), d.F1 * d.F1, 1e-14);
  EXPECT_NEAR(mixed_hessian_fd(x, x, params), d.F1 * d.F1, 1e-6);
}

TEST(MixedHessian, FdIsGenericOverCosts) {
  // −log(1 − x·y) at x ⊥ y.
  const UnitVec3 x = normalize({1, 0, 0}), y = normalize({0, 1, 0});
  const double v = mixed_hessian_fd(ReflectorAntennaCost{}, x, y);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
}

TEST(Csc, MatchesNestedFiniteDifferences) {
  Rng rng(42);
  for (double a : {0.4, 0.5}) {
    const auto params = CostParams::from_ratio(a, kE);
    const double p_max = domain_bounds(params).p_star;
    for (int k = 0; k < 60; ++k) {
      const UnitVec3 x = rng.on_sphere();
      const Vec3 p = rng.tangent(x, 0.8 * p_max);
      if (norm(p) < 0.05 * p_max) continue;
      const auto [xi, eta] = tangent_pair(x, rng.uniform(0, 6.3));
      const double v = csc_evaluate({x, p, xi, eta, 0.0}, params);
      const double oracle = nested_fd_csc(x, p, xi, eta, params, 1e-3 * p_max);
      EXPECT_NEAR(v, oracle, 1e-4 * (1 + std::abs(oracle)));
    }
  }
}

// Independent 40-digit evaluation (geodesic Hessian of the exact cost with y
// from a root finder, differentiated twice in p) gives exactly |ξ|²|η|² = 1
// for orthonormal pairs at a = 0.4 and 0.5.
TEST(Csc, FrozenReferenceValue) {
  Rng rng(43);
  for (double a : {0.4, 0.5}) {
    const auto params = CostParams::from_ratio(a, kE);
    const double p_max = domain_bounds(params).p_star;
    for (int k = 0; k < 200; ++k) {
      const UnitVec3 x = rng.on_sphere();
      const Vec3 p = rng.tangent(x, 0.9 * p_max);
      if (norm(p) < 0.02 * p_max) continue;
      const auto [xi, eta] = tangent_pair(x, rng.uniform(0, 6.3));
      EXPECT_NEAR(csc_evaluate({x, p, xi, eta, 0.0}, params), 1.0, 1e-5);
    }
  }
}

TEST(Csc, EvenInXiAndEta) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const UnitVec3 x = normalize({0.2, 0.4, -0.9});
  const Vec3 p = 0.03 * basis_at(x)[0].vec();
  const auto [xi, eta] = tangent_pair(x, 0.7);
  const double v = csc_evaluate({x, p, xi, eta, 0.0}, params);
  EXPECT_NEAR(csc_evaluate({x, p, -1.0 * xi, eta, 0.0}, params), v, 1e-8);
  EXPECT_NEAR(csc_evaluate({x, p, xi, -1.0 * eta, 0.0}, params), v, 1e-8);
  EXPECT_NEAR(csc_evaluate({x, p, 2.0 * xi, eta, 0.0}, params), 4 * v, 1e-7);
}

TEST(Csc, AxisReducedFormAgreesAtMinusE) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const UnitVec3 x = -kE;
  for (double pn : {0.005, 0.02, 0.04}) {
    for (double th : {0.0, 0.6, 1.9}) {
      const auto [xi, eta] = tangent_pair(x, th);
      const Vec3 p = pn * tangent_pair(x, 0.3).first;
      const CurvatureSample smp{x, p, xi, eta, 0.0};
      EXPECT_NEAR(csc_reduced_axis(smp, params), csc_evaluate(smp, params), 1e-6);
    }
  }
}

// For a = 0 the cost is log((1 + x·y)/2), a function of distance only.
TEST(Csc, IsotropicBaselineHasOneSign) {
  const auto params = CostParams::from_ratio(0.0, kE);
  Rng rng(44);
  int pos = 0, neg = 0;
  for (int k = 0; k < 300; ++k) {
    const UnitVec3 x = rng.on_sphere();
    const Vec3 p = rng.tangent(x, 1.0);
    if (norm(p) < 0.05) continue;
    const auto [xi, eta] = tangent_pair(x, rng.uniform(0, 6.3));
    const double v = csc_evaluate({x, p, xi, eta, 0.0}, params);
    (v > 0 ? pos : neg)++;
  }
  EXPECT_TRUE(pos == 0 || neg == 0) << pos << " positive, " << neg << " negative";
}

TEST(Profile, StartsAtClosedFormValue) {
  for (double a : {0.2, 0.35, 0.5}) {
    const auto prof = f11_profile(a, 50);
    EXPECT_NEAR(prof.front().f11, -(1 - a) / (2 * (1 + a)), 1e-15);
    EXPECT_EQ(prof.front().p_norm, 0.0);
    EXPECT_NEAR(prof.back().p_norm, axis_p_max(a), 1e-15);
    for (const auto& pt : prof) EXPECT_TRUE(std::isfinite(pt.f11));
  }
}

// Expanding f11 = −((s + a)/(1 + a)) / (α(1 + a s) − 1 + s) with
// s = (1 − ρ²)/(1 + ρ²), ρ = ∥p∥(1 + a)/(1 − a), gives f11 = f11(0) + ∥p∥²/2 + O(∥p∥⁴).
TEST(Profile, SecondDerivativeAtZeroIsOne) {
  for (double a : {0.2, 0.35, 0.5}) {
    EXPECT_NEAR(profile_second_difference_at_zero(f11_profile(a, 4001)), 1.0, 1e-6);
  }
}

TEST(Profile, MatchesForwardMapOnTheAxis) {
  const double a = 0.5;
  const auto params = CostParams::from_ratio(a, kE);
  const UnitVec3 x = -kE;
  const Vec3 dir = basis_at(x)[0].vec();
  for (double pn : {0.01, 0.1, 0.3}) {
    const UnitVec3 y = forward_explicit(x, {x, pn * dir}, params);
    const FStack fs = f_stack(x, pn * dir, params);
    EXPECT_NEAR(fs(11), axis_f11(a, pn), 1e-12);
    EXPECT_NEAR(dot(x.vec(), y.vec()), axis_xy(a, pn), 1e-13);
  }
}

TEST(Scan, ReportAtHalf) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const auto b = domain_bounds(params);
  const auto rep = mtw_scan(params, b, 0.5 * b.p_star, GridSpec{6, 6, 4, 2});
  EXPECT_EQ(rep.samples, 6u * 6u * 4u * 2u);
  EXPECT_GT(rep.a2_min_abs, 0.0);
  EXPECT_LT(rep.a2_max_rel_gap, 1e-3);
  EXPECT_GT(rep.a1_min_separation, 0.0);
  EXPECT_FALSE(rep.aw_holds);
  ASSERT_TRUE(rep.counterexample.has_value());
  ASSERT_TRUE(rep.axis_counterexample.has_value());
  EXPECT_LT(geodesic_distance(rep.axis_counterexample->x, -kE), 1e-12);
  EXPECT_GT(csc_reduced_axis(*rep.axis_counterexample, params), kAwTolerance);
}

TEST(Scan, SampleListMatchesReport) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const auto b = domain_bounds(params);
  const GridSpec grid{4, 4, 3, 2};
  const auto rep = mtw_scan(params, b, 0.5 * b.p_star, grid);
  const auto all = csc_scan(params, b, 0.5 * b.p_star, grid);
  ASSERT_EQ(all.size(), rep.samples);
  double lo = 1e300, hi = -1e300;
  for (const auto& s : all) {
    lo = std::min(lo, s.value);
    hi = std::max(hi, s.value);
  }
  EXPECT_EQ(lo, rep.csc_min);
  EXPECT_EQ(hi, rep.csc_max);
}

TEST(Scan, GammaMustBeInsideTheBall) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const auto b = domain_bounds(params);
  try {
    mtw_scan(params, b, 2 * b.p_star);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::GammaOutOfRange);
  }
}
