#include <gtest/gtest.h>

#include <cmath>

#include "preftrans/rng.hpp"
#include "preftrans/transport.hpp"
#include "preftrans/validation.hpp"

using namespace preftrans;

namespace {

const UnitVec3 kE = UnitVec3::unchecked({0, 0, 1});

struct Fixture {
  CostParams params = CostParams::from_ratio(0.5, kE);
  DomainBounds bounds = domain_bounds(params);
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::IoError;
}

DiscreteMeasure random_weights(Rng& rng, std::vector<UnitVec3> pts) {
  DiscreteMeasure m{std::move(pts), {}};
  double total = 0;
  for (std::size_t k = 0; k < m.points.size(); ++k) {
    m.weights.push_back(0.1 + rng.uniform());
    total += m.weights.back();
  }
  for (double& w : m.weights) w /= total;
  return m;
}

}  // namespace

TEST(Measure, Validation) {
  const UnitVec3 a = normalize({1, 0, 0}), b = normalize({0, 1, 0});
  EXPECT_EQ(code_of([&] { validate_measure({}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([&] { validate_measure({{a, b}, {1.5, -0.5}}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([&] { validate_measure({{a, b}, {0.5, 0.6}}); }), Errc::Infeasible);
  EXPECT_EQ(code_of([&] { validate_measure({{a, a}, {0.5, 0.5}}); }), Errc::DegenerateInput);
  EXPECT_NO_THROW(validate_measure({{a, b}, {0.25, 0.75}}));
}

TEST(CostMatrix, RejectsPairsOutsideOmega) {
  EXPECT_EQ(code_of([] { cost_matrix(fx().params, {kE}, {-kE}); }), Errc::OutsideOmega);
}

TEST(SupportBall, ClosedBallAroundCenter) {
  const double r = fx().bounds.support_radius();
  const UnitVec3 c = normalize({0.2, 0.3, 0.9});
  const UnitVec3 on_edge = from_polar(c, r, 1.0), outside = from_polar(c, r * 1.01, 1.0);
  const DiscreteMeasure in{{c, on_edge}, {0.5, 0.5}}, out{{c, outside}, {0.5, 0.5}};
  EXPECT_TRUE(support_ball_check(in, in, c, fx().bounds));
  EXPECT_FALSE(support_ball_check(in, out, c, fx().bounds));
}

// Exhaustive search over permutations, evaluated with the same plan_cost
// summation, so equality is exact.
TEST(Lp, EqualsPermutationMinimum) {
  Rng rng(51);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 7);
    const Instance inst = random_instance(rng, rng.on_sphere(), fx().bounds.support_radius(), n);
    const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
    EXPECT_EQ(solve_lp(inst.mu, inst.nu, C).primal, brute_force_assignment(C)) << "n=" << n;
  }
}

// Primal feasibility, dual feasibility, and a zero gap certify optimality
// without reference to any other solver.
TEST(Lp, OptimalityCertificateWithUnequalWeights) {
  Rng rng(52);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + static_cast<std::size_t>(t % 9), m = 2 + static_cast<std::size_t>(t % 5);
    const UnitVec3 c = rng.on_sphere();
    const double r = fx().bounds.support_radius();
    std::vector<UnitVec3> X, Y;
    for (std::size_t k = 0; k < n; ++k) X.push_back(rng.in_cap(c, r));
    for (std::size_t k = 0; k < m; ++k) Y.push_back(rng.in_cap(c, r));
    const auto mu = random_weights(rng, X), nu = random_weights(rng, Y);
    const CostMatrix C = cost_matrix(fx().params, X, Y);
    const LpResult res = solve_lp(mu, nu, C);
    EXPECT_LT(marginal_error(res.plan, mu, nu), 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) EXPECT_LE(res.potentials.u[i] + res.potentials.v[j], C(i, j) + 1e-9);
    }
    for (const auto& e : res.plan.entries) {
      EXPECT_GT(e.mass, 0.0);
      EXPECT_NEAR(res.potentials.u[e.i] + res.potentials.v[e.j], C(e.i, e.j), 1e-9);
    }
    EXPECT_NEAR(res.primal, res.dual, 1e-8);
  }
}

TEST(Lp, ShapeMismatchIsRejected) {
  const DiscreteMeasure m{{kE}, {1.0}};
  const CostMatrix C{2, 1, {0.0, 0.0}};
  EXPECT_EQ(code_of([&] { solve_lp(m, m, C); }), Errc::DegenerateInput);
}

TEST(Sinkhorn, CloseToLpAndBalanced) {
  Rng rng(53);
  const SinkhornOptions opt;
  for (int t = 0; t < 3; ++t) {
    const Instance inst = random_instance(rng, rng.on_sphere(), fx().bounds.support_radius(), 20);
    const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
    const double lp = solve_lp(inst.mu, inst.nu, C).primal;
    const SinkhornResult sk = solve_sinkhorn(inst.mu, inst.nu, C, opt);
    EXPECT_TRUE(sk.converged);
    EXPECT_LT(std::abs(sk.objective - lp), 5 * opt.epsilon * std::log(20.0));
    EXPECT_GE(sk.objective, lp - 1e-12);
    EXPECT_LT(marginal_error(sk.plan, inst.mu, inst.nu), 1e-8);
  }
}

TEST(Sinkhorn, ReportsNonConvergenceInsteadOfThrowing) {
  Rng rng(54);
  const Instance inst = random_instance(rng, kE, fx().bounds.support_radius(), 10);
  const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
  SinkhornOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-15;
  const auto sk = solve_sinkhorn(inst.mu, inst.nu, C, opt);
  EXPECT_FALSE(sk.converged);
  EXPECT_GT(sk.marginal_residual, 0.0);
}

TEST(Sinkhorn, InputErrors) {
  const UnitVec3 a = normalize({0, 0.1, 1}), b = normalize({0.1, 0, 1});
  const DiscreteMeasure zero{{a, b}, {1.0, 0.0}}, ok{{a, b}, {0.5, 0.5}};
  const CostMatrix C = cost_matrix(fx().params, ok.points, ok.points);
  EXPECT_EQ(code_of([&] { solve_sinkhorn(zero, ok, C); }), Errc::DegenerateInput);
  SinkhornOptions bad;
  bad.epsilon = 0.0;
  EXPECT_EQ(code_of([&] { solve_sinkhorn(ok, ok, C, bad); }), Errc::ConfigError);
}

TEST(CTransform, OrderProperties) {
  Rng rng(55);
  const Instance inst = random_instance(rng, kE, fx().bounds.support_radius(), 12);
  const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
  // u ≡ 0: u^c = max(−c) ≥ 0 because c ≤ 0.
  for (double v : c_transform(C, std::vector<double>(12, 0.0))) EXPECT_GE(v, 0.0);
  std::vector<double> u(12);
  for (double& x : u) x = rng.normal();
  const auto uc = c_transform(C, u);
  const auto ucc = c_transform_cols(C, uc);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_LE(ucc[i], u[i] + 1e-15);
  // Transforms are idempotent after one round: ((u^c)^c)^c = u^c.
  const auto uccc = c_transform(C, ucc);
  for (std::size_t j = 0; j < 12; ++j) EXPECT_NEAR(uccc[j], uc[j], 1e-14);
  // Params overload agrees with the matrix version.
  EXPECT_EQ(c_transform(fx().params, u, inst.mu.points, inst.nu.points), uc);
}

TEST(CTransform, LpPotentialIsCConvexOnTheSupport) {
  Rng rng(56);
  const Instance inst = random_instance(rng, kE, fx().bounds.support_radius(), 15);
  const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
  const LpResult res = solve_lp(inst.mu, inst.nu, C);
  const auto phi = c_convex_potential(res.potentials);
  const auto phicc = c_transform_cols(C, c_transform(C, phi));
  for (const auto& e : res.plan.entries) EXPECT_NEAR(phicc[e.i], phi[e.i], 1e-8);
}

TEST(GeneralizedSolution, LpPlanLivesOnTheContactSet) {
  Rng rng(57);
  const Instance inst = random_instance(rng, kE, fx().bounds.support_radius(), 10);
  const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
  const LpResult res = solve_lp(inst.mu, inst.nu, C);
  const auto rep = generalized_solution_check(res.plan, res.potentials, C, inst.nu, 1e-7);
  EXPECT_TRUE(rep.ok());
  EXPECT_GE(rep.contact.size(), res.plan.entries.size());
  EXPECT_LT(rep.max_support_gap, 1e-7);
}

TEST(GeneralizedSolution, PerturbedPotentialsAreFlagged) {
  Rng rng(58);
  const Instance inst = random_instance(rng, kE, fx().bounds.support_radius(), 10);
  const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
  LpResult res = solve_lp(inst.mu, inst.nu, C);
  for (double& u : res.potentials.u) u += 1e-3 * rng.normal();
  const auto rep = generalized_solution_check(res.plan, res.potentials, C, inst.nu, 1e-7);
  EXPECT_FALSE(rep.ok());
  EXPECT_GT(rep.support_violations, 0u);
}

TEST(GeneralizedSolution, ConstantShiftKeepsContactSet) {
  Rng rng(59);
  const Instance inst = random_instance(rng, kE, fx().bounds.support_radius(), 10);
  const CostMatrix C = cost_matrix(fx().params, inst.mu.points, inst.nu.points);
  const LpResult res = solve_lp(inst.mu, inst.nu, C);
  const auto base = generalized_solution_check(res.plan, res.potentials, C, inst.nu, 1e-7);
  Potentials shifted = res.potentials;
  for (double& u : shifted.u) u += 2.5;
  for (double& v : shifted.v) v -= 2.5;
  const auto rep = generalized_solution_check(res.plan, shifted, C, inst.nu, 1e-7);
  EXPECT_EQ(rep.contact, base.contact);
  EXPECT_EQ(restrict_to_contact(res.plan, rep.contact).entries.size(), res.plan.entries.size());
}

// --- Monge–Ampère residual -------------------------------------------------------

namespace {

// φ(x) = κ w·x has ∇φ = κ(w − (w·x)x) and ∇²φ = −κ(w·x) Id, so the density
// ratio that makes the residual vanish is known in closed form.
struct Manufactured {
  CostParams params = CostParams::from_ratio(0.5, kE);
  Vec3 w{0.6, 0.0, 0.8};
  double kappa = 0.03;

  double phi(const UnitVec3& x) const { return kappa * dot(w, x.vec()); }
  Vec3 grad(const UnitVec3& x) const { return kappa * (w - dot(w, x.vec()) * x.vec()); }
  double f(const UnitVec3& x) const {
    const Vec3 p = grad(x);
    const UnitVec3 y = forward_explicit(x, {x, p}, params);
    Mat2 h = hessian_xx(params, x, y);
    h.a00 -= kappa * dot(w, x.vec());
    h.a11 -= kappa * dot(w, x.vec());
    return std::abs(h.det()) / mixed_hessian_analytic(x, p, params);
  }
};

double max_residual(const Manufactured& mf, double h, int m) {
  const UnitVec3 x0 = normalize({0.1, 0.2, 1.0});
  const PdeMesh mesh = sample_mesh(x0, h, m, [&](const UnitVec3& x) { return mf.phi(x); });
  double worst = 0.0;
  for (const auto& nd : pde_residual(mesh, mf.params, [&](const UnitVec3& x) { return mf.f(x); },
                                     [](const UnitVec3&) { return 1.0; })) {
    EXPECT_NEAR(norm(nd.grad - mf.grad(nd.x)), 0.0, 10 * h * h);
    worst = std::max(worst, std::abs(nd.residual));
  }
  return worst;
}

}  // namespace

TEST(PdeResidual, ManufacturedSolutionConverges) {
  const Manufactured mf;
  const double r1 = max_residual(mf, 0.04, 2);
  const double r2 = max_residual(mf, 0.02, 4);
  const double r3 = max_residual(mf, 0.01, 8);
  EXPECT_LT(r1, 1e-3);
  EXPECT_LT(r2, 0.5 * r1);
  EXPECT_LT(r3, 0.5 * r2);
}

TEST(PdeResidual, ConstantPotentialAtTheDiagonal) {
  const auto params = CostParams::from_ratio(0.5, kE);
  const PdeMesh mesh = sample_mesh(normalize({1, 1, 1}), 0.05, 3, [](const UnitVec3&) { return 4.0; });
  for (const auto& nd : pde_residual(mesh, params, [](const UnitVec3&) { return 1.0; },
                                     [](const UnitVec3&) { return 1.0; })) {
    EXPECT_EQ(nd.x, nd.y);
    EXPECT_NEAR(nd.residual, 0.0, 1e-9 * nd.rhs);
  }
}

TEST(PdeResidual, CoarseMeshIsRejected) {
  const auto params = CostParams::from_ratio(0.5, kE);
  auto zero = [](const UnitVec3&) { return 0.0; };
  auto one = [](const UnitVec3&) { return 1.0; };
  EXPECT_EQ(code_of([&] { pde_residual(sample_mesh(kE, 0.3, 2, zero), params, one, one); }), Errc::MeshTooCoarse);
  EXPECT_EQ(code_of([&] { pde_residual(sample_mesh(kE, 0.1, 0, zero), params, one, one); }), Errc::MeshTooCoarse);
}
