#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "preftrans/cost.hpp"
#include "preftrans/error.hpp"
#include "preftrans/mapping.hpp"
#include "preftrans/mtw.hpp"
#include "preftrans/parallel.hpp"
#include "preftrans/sphere.hpp"

namespace preftrans {

struct DiscreteMeasure {
  std::vector<UnitVec3> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

inline constexpr double kWeightSumTol = 1e-12;
inline constexpr double kDuplicateTol = 1e-10;

/// Throws unless weights are nonnegative, sum to one, and points are distinct.
inline void validate_measure(const DiscreteMeasure& m) {
  if (m.points.empty() || m.points.size() != m.weights.size()) {
    fail(Errc::DegenerateInput, "measure needs matching, non-empty points and weights");
  }
  double total = 0.0;
  for (double w : m.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(Errc::DegenerateInput, "negative or non-finite weight");
    total += w;
  }
  if (std::abs(total - 1.0) > kWeightSumTol) fail(Errc::Infeasible, "weights do not sum to 1");
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (norm(m.points[i].vec() - m.points[j].vec()) < kDuplicateTol) {
        fail(Errc::DegenerateInput, "duplicate support points");
      }
    }
  }
}

/// Uniform weights 1/n on the given points.
inline DiscreteMeasure uniform_measure(std::vector<UnitVec3> pts) {
  const double w = 1.0 / static_cast<double>(pts.size());
  DiscreteMeasure m{std::move(pts), {}};
  m.weights.assign(m.points.size(), w);
  return m;
}

struct PlanEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double mass = 0.0;
};

/// Sparse coupling, entries sorted by (i, j).
struct TransportPlan {
  std::size_t n_source = 0;
  std::size_t n_target = 0;
  std::vector<PlanEntry> entries;
};

/// Kantorovich dual variables with u_i + v_j ≤ c_ij.
struct Potentials {
  std::vector<double> u;
  std::vector<double> v;
};

/// Row-major n×m matrix of c(x_i, y_j).
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline CostMatrix cost_matrix(const CostParams& params, const std::vector<UnitVec3>& X,
                              const std::vector<UnitVec3>& Y) {
  CostMatrix C{X.size(), Y.size(), std::vector<double>(X.size() * Y.size())};
  parallel_for(X.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < Y.size(); ++j) {
      const CostArgs args = cost_args(params, X[i], Y[j]);
      if (!in_omega(params, args)) fail(Errc::OutsideOmega, "cost matrix pair outside Omega");
      C.data[i * Y.size() + j] = eval_cost(params, args);
    }
  });
  return C;
}

/// Σ π_ij c_ij accumulated in entry order.
inline double plan_cost(const TransportPlan& plan, const CostMatrix& C) {
  double total = 0.0;
  for (const auto& e : plan.entries) total += e.mass * C(e.i, e.j);
  return total;
}

inline double dual_objective(const Potentials& pot, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu) {
  double k = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) k += mu.weights[i] * pot.u[i];
  for (std::size_t j = 0; j < nu.size(); ++j) k += nu.weights[j] * pot.v[j];
  return k;
}

/// Largest violation of |row sum − μ_i| and |column sum − ν_j|.
inline double marginal_error(const TransportPlan& plan, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu) {
  std::vector<double> r(mu.size(), 0.0), c(nu.size(), 0.0);
  for (const auto& e : plan.entries) {
    r[e.i] += e.mass;
    c[e.j] += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) err = std::max(err, std::abs(r[i] - mu.weights[i]));
  for (std::size_t j = 0; j < c.size(); ++j) err = std::max(err, std::abs(c[j] - nu.weights[j]));
  return err;
}

// --- support ball ---------------------------------------------------------------

/// True iff every support point of μ and ν is within geodesic distance
/// arccos(ξ*)/2 of x0 (closed ball).
inline bool support_ball_check(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               const UnitVec3& x0, const DomainBounds& bounds) {
  const double radius = bounds.support_radius();
  const double slack = 1e-12 * std::max(1.0, radius);
  auto inside = [&](const DiscreteMeasure& m) {
    return std::all_of(m.points.begin(), m.points.end(),
                       [&](const UnitVec3& p) { return geodesic_distance(p, x0) <= radius + slack; });
  };
  return inside(mu) && inside(nu);
}

// --- exact LP -------------------------------------------------------------------

struct LpResult {
  TransportPlan plan;
  Potentials potentials;
  double primal = 0.0;
  double dual = 0.0;
  std::size_t augmentations = 0;
};

inline LpResult solve_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostMatrix& C) {
  validate_measure(mu);
  validate_measure(nu);
  const std::size_t n = mu.size(), m = nu.size();
  if (C.rows != n || C.cols != m) fail(Errc::DegenerateInput, "cost matrix shape mismatch");

  // Successive shortest paths with Johnson potentials on the bipartite
  // residual graph. Costs are shifted to be nonnegative so zero potentials
  // start out dual feasible.
  const double cmin = *std::min_element(C.data.begin(), C.data.end());
  auto cost = [&](std::size_t i, std::size_t j) { return C(i, j) - cmin; };
  constexpr double kDust = 1e-15;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> supply = mu.weights, demand = nu.weights;
  std::vector<double> flow(n * m, 0.0);
  std::vector<double> pi(n + m, 0.0);  // sources 0..n-1, targets n..n+m-1
  std::vector<double> dist(n + m);
  std::vector<std::ptrdiff_t> parent(n + m);
  std::vector<char> done(n + m);

  LpResult res;
  // Both marginals sum to 1 only within kWeightSumTol, so stop as soon as
  // either side is exhausted.
  auto any_left = [&](const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [&](double w) { return w > kDust; });
  };
  while (any_left(supply) && any_left(demand)) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (supply[i] > kDust) dist[i] = 0.0;
    }
    // Dense Dijkstra.
    for (;;) {
      std::size_t best = n + m;
      for (std::size_t v = 0; v < n + m; ++v) {
        if (!done[v] && dist[v] < kInf && (best == n + m || dist[v] < dist[best])) best = v;
      }
      if (best == n + m) break;
      done[best] = 1;
      if (best < n) {
        const std::size_t i = best;
        for (std::size_t j = 0; j < m; ++j) {
          const double rc = std::max(0.0, cost(i, j) + pi[i] - pi[n + j]);
          if (dist[i] + rc < dist[n + j]) {
            dist[n + j] = dist[i] + rc;
            parent[n + j] = static_cast<std::ptrdiff_t>(i);
          }
        }
      } else {
        const std::size_t j = best - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow[i * m + j] <= kDust) continue;
          const double rc = std::max(0.0, -cost(i, j) + pi[n + j] - pi[i]);
          if (dist[best] + rc < dist[i]) {
            dist[i] = dist[best] + rc;
            parent[i] = static_cast<std::ptrdiff_t>(best);
          }
        }
      }
    }
    std::size_t sink = n + m;
    for (std::size_t j = 0; j < m; ++j) {
      if (demand[j] > kDust && dist[n + j] < kInf && (sink == n + m || dist[n + j] < dist[sink])) {
        sink = n + j;
      }
    }
    if (sink == n + m) fail(Errc::Infeasible, "no augmenting path; marginals incompatible");
    const double d_sink = dist[sink];
    for (std::size_t v = 0; v < n + m; ++v) pi[v] += std::min(dist[v], d_sink);

    // Bottleneck along the path sink ← ... ← source.
    double delta = demand[sink - n];
    std::size_t v = sink;
    while (parent[v] >= 0) {
      const std::size_t u = static_cast<std::size_t>(parent[v]);
      if (u >= n) delta = std::min(delta, flow[v * m + (u - n)]);  // backward edge target u → source v
      v = u;
    }
    delta = std::min(delta, supply[v]);
    const std::size_t source = v;
    v = sink;
    while (parent[v] >= 0) {
      const std::size_t u = static_cast<std::size_t>(parent[v]);
      if (u < n) {
        flow[u * m + (v - n)] += delta;
      } else {
        flow[v * m + (u - n)] -= delta;
      }
      v = u;
    }
    supply[source] -= delta;
    demand[sink - n] -= delta;
    ++res.augmentations;
  }

  res.plan.n_source = n;
  res.plan.n_target = m;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (flow[i * m + j] > kDust) res.plan.entries.push_back({i, j, flow[i * m + j]});
    }
  }
  res.potentials.u.resize(n);
  res.potentials.v.resize(m);
  for (std::size_t i = 0; i < n; ++i) res.potentials.u[i] = -pi[i];
  for (std::size_t j = 0; j < m; ++j) res.potentials.v[j] = pi[n + j] + cmin;
  res.primal = plan_cost(res.plan, C);
  res.dual = dual_objective(res.potentials, mu, nu);
  return res;
}

inline LpResult solve_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const CostParams& params) {
  return solve_lp(mu, nu, cost_matrix(params, mu.points, nu.points));
}

/// Minimum of plan_cost over all permutation plans (uniform weights, n ≤ 9).
inline double brute_force_assignment(const CostMatrix& C) {
  const std::size_t n = C.rows;
  if (n != C.cols || n == 0 || n > 9) fail(Errc::DegenerateInput, "brute force needs square n <= 9");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const double w = 1.0 / static_cast<double>(n);
  double best = std::numeric_limits<double>::infinity();
  TransportPlan plan{n, n, std::vector<PlanEntry>(n)};
  do {
    for (std::size_t i = 0; i < n; ++i) plan.entries[i] = {i, perm[i], w};
    best = std::min(best, plan_cost(plan, C));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// --- entropic ---------------------------------------------------------------------

struct SinkhornOptions {
  double epsilon = 1e-3;  // final regularization
  double epsilon_start = 1e-1;
  int max_iter = 10000;  // per ε stage
  double tol = 1e-9;     // marginal residual (max abs) per stage
};

struct SinkhornResult {
  TransportPlan plan;
  Potentials potentials;
  double objective = 0.0;
  double marginal_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double logsumexp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Log-domain Sinkhorn with ε halved from epsilon_start down to epsilon, warm
/// starting each stage. Never throws on non-convergence: the best iterate is
/// returned with converged = false.
inline SinkhornResult solve_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     const CostMatrix& C, const SinkhornOptions& opt = {}) {
  validate_measure(mu);
  validate_measure(nu);
  if (!(opt.epsilon > 0.0) || !(opt.tol > 0.0) || opt.max_iter < 1) {
    fail(Errc::ConfigError, "sinkhorn needs epsilon > 0, tol > 0, max_iter >= 1");
  }
  const std::size_t n = mu.size(), m = nu.size();
  for (double w : mu.weights) if (w <= 0.0) fail(Errc::DegenerateInput, "sinkhorn needs positive weights");
  for (double w : nu.weights) if (w <= 0.0) fail(Errc::DegenerateInput, "sinkhorn needs positive weights");

  std::vector<double> loga(n), logb(m);
  for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(mu.weights[i]);
  for (std::size_t j = 0; j < m; ++j) logb[j] = std::log(nu.weights[j]);

  std::vector<double> f(n, 0.0), g(m, 0.0), buf_n(n), buf_m(m);
  SinkhornResult res;
  std::vector<double> schedule;
  for (double e = std::max(opt.epsilon_start, opt.epsilon); e > opt.epsilon; e *= 0.5) schedule.push_back(e);
  schedule.push_back(opt.epsilon);

  auto row_residual = [&](double eps) {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) buf_m[j] = (f[i] + g[j] - C(i, j)) / eps + logb[j];
      err = std::max(err, std::abs(std::exp(detail::logsumexp(buf_m) + loga[i]) - mu.weights[i]));
    }
    return err;
  };

  double eps = schedule.front();
  for (double stage_eps : schedule) {
    eps = stage_eps;
    res.converged = false;
    for (int it = 0; it < opt.max_iter; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) buf_m[j] = (g[j] - C(i, j)) / eps + logb[j];
        f[i] = -eps * detail::logsumexp(buf_m);
      }
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) buf_n[i] = (f[i] - C(i, j)) / eps + loga[i];
        g[j] = -eps * detail::logsumexp(buf_n);
      }
      ++res.iterations;
      // Columns are exact after the g update; only rows need checking.
      res.marginal_residual = row_residual(eps);
      if (res.marginal_residual < opt.tol) {
        res.converged = true;
        break;
      }
    }
  }

  res.plan.n_source = n;
  res.plan.n_target = m;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double mass = std::exp((f[i] + g[j] - C(i, j)) / eps + loga[i] + logb[j]);
      if (mass > 0.0) res.plan.entries.push_back({i, j, mass});
    }
  }
  res.potentials = {f, g};
  res.objective = plan_cost(res.plan, C);
  return res;
}

// --- c-transform and generalized solutions ------------------------------------------

/// u^c(y_j) = max_i (−c(x_i, y_j) − u_i) over the rows of C.
inline std::vector<double> c_transform(const CostMatrix& C, const std::vector<double>& u) {
  std::vector<double> out(C.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < C.rows; ++i) {
    for (std::size_t j = 0; j < C.cols; ++j) out[j] = std::max(out[j], -C(i, j) - u[i]);
  }
  return out;
}

/// Transform in the other direction: max over the columns of C.
inline std::vector<double> c_transform_cols(const CostMatrix& C, const std::vector<double>& v) {
  std::vector<double> out(C.rows, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < C.rows; ++i) {
    for (std::size_t j = 0; j < C.cols; ++j) out[i] = std::max(out[i], -C(i, j) - v[j]);
  }
  return out;
}

inline std::vector<double> c_transform(const CostParams& params, const std::vector<double>& u,
                                       const std::vector<UnitVec3>& X,
                                       const std::vector<UnitVec3>& Y) {
  return c_transform(cost_matrix(params, X, Y), u);
}

/// c-convex potential φ = −u of an LP dual pair, so that ∇φ = −∇ₓc = p.
inline std::vector<double> c_convex_potential(const Potentials& pot) {
  std::vector<double> phi(pot.u.size());
  std::transform(pot.u.begin(), pot.u.end(), phi.begin(), [](double v) { return -v; });
  return phi;
}

struct GeneralizedSolutionReport {
  std::vector<std::pair<std::size_t, std::size_t>> contact;  // sorted (i, j) with φ + φᶜ = −c
  std::size_t support_violations = 0;   // plan entries outside the contact set
  std::size_t pushforward_violations = 0;  // targets whose contact mass ≠ ν_j
  double max_support_gap = 0.0;

  bool ok() const { return support_violations == 0 && pushforward_violations == 0; }
};

/// Checks that the plan lives on the contact set of φ = −u and that mass
/// carried along contact pairs reproduces ν on every singleton {y_j}.
inline GeneralizedSolutionReport generalized_solution_check(const TransportPlan& plan,
                                                            const Potentials& pot,
                                                            const CostMatrix& C,
                                                            const DiscreteMeasure& nu, double tol) {
  GeneralizedSolutionReport rep;
  const auto phi = c_convex_potential(pot);
  const auto phi_c = c_transform(C, phi);
  auto gap = [&](std::size_t i, std::size_t j) { return std::abs(phi[i] + phi_c[j] + C(i, j)); };
  for (std::size_t i = 0; i < C.rows; ++i) {
    for (std::size_t j = 0; j < C.cols; ++j) {
      if (gap(i, j) <= tol) rep.contact.emplace_back(i, j);
    }
  }
  std::vector<double> col(C.cols, 0.0);
  for (const auto& e : plan.entries) {
    const double d = gap(e.i, e.j);
    rep.max_support_gap = std::max(rep.max_support_gap, d);
    if (d > tol) {
      ++rep.support_violations;
    } else {
      col[e.j] += e.mass;
    }
  }
  for (std::size_t j = 0; j < C.cols; ++j) {
    if (std::abs(col[j] - nu.weights[j]) > tol) ++rep.pushforward_violations;
  }
  return rep;
}

/// Plan entries that lie on the given contact set.
inline TransportPlan restrict_to_contact(const TransportPlan& plan,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& contact) {
  TransportPlan out{plan.n_source, plan.n_target, {}};
  for (const auto& e : plan.entries) {
    if (std::binary_search(contact.begin(), contact.end(), std::make_pair(e.i, e.j))) {
      out.entries.push_back(e);
    }
  }
  return out;
}

// --- Monge–Ampère residual ------------------------------------------------------------

/// Samples of a potential φ on a gnomonic grid around x0: node (a, b), with
/// a, b ∈ [−m, m], sits at normalize(x0 + h(a e1 + b e2)) in basis_at(x0).
struct PdeMesh {
  UnitVec3 x0;
  double h = 0.05;
  int m = 4;
  std::vector<double> values;  // (2m+1)² row-major in (a, b)

  int side() const { return 2 * m + 1; }
  UnitVec3 node(int a, int b) const {
    const auto [e1, e2] = basis_at(x0);
    return normalize(x0.vec() + h * (a * e1.vec() + b * e2.vec()));
  }
  double& at(int a, int b) { return values[static_cast<std::size_t>((a + m) * side() + (b + m))]; }
  double at(int a, int b) const { return values[static_cast<std::size_t>((a + m) * side() + (b + m))]; }
};

template <typename Phi>
PdeMesh sample_mesh(const UnitVec3& x0, double h, int m, Phi&& phi) {
  PdeMesh mesh{x0, h, m, std::vector<double>(static_cast<std::size_t>((2 * m + 1) * (2 * m + 1)))};
  for (int a = -m; a <= m; ++a) {
    for (int b = -m; b <= m; ++b) mesh.at(a, b) = phi(mesh.node(a, b));
  }
  return mesh;
}

struct PdeNode {
  int a = 0;
  int b = 0;
  UnitVec3 x;
  UnitVec3 y;       // T(x) = forward(x, ∇φ(x))
  Vec3 grad;        // ∇φ(x)
  double lhs = 0.0;  // |det(∇²φ + ∇²ₓₓc)|
  double rhs = 0.0;  // |det D²ₓᵧc| f(x)/g(y)
  double residual = 0.0;
};

inline constexpr double kMaxMeshStep = 0.25;

/// Gradient and Riemannian Hessian of φ at an interior node, from chart
/// differences of the degree-0 homogeneous extension φ̃(z) = φ(z/|z|).
inline std::pair<Vec3, Mat2> mesh_derivatives(const PdeMesh& mesh, int a, int b) {
  const auto [e1, e2] = basis_at(mesh.x0);
  const double h = mesh.h;
  const Vec3 z = mesh.x0.vec() + h * (a * e1.vec() + b * e2.vec());
  const double r = norm(z);
  const UnitVec3 x = normalize(z);
  const double g1 = (mesh.at(a + 1, b) - mesh.at(a - 1, b)) / (2 * h);
  const double g2 = (mesh.at(a, b + 1) - mesh.at(a, b - 1)) / (2 * h);
  const double H11 = (mesh.at(a + 1, b) - 2 * mesh.at(a, b) + mesh.at(a - 1, b)) / (h * h);
  const double H22 = (mesh.at(a, b + 1) - 2 * mesh.at(a, b) + mesh.at(a, b - 1)) / (h * h);
  const double H12 = (mesh.at(a + 1, b + 1) - mesh.at(a + 1, b - 1) - mesh.at(a - 1, b + 1) +
                      mesh.at(a - 1, b - 1)) / (4 * h * h);
  // Basis {e1, e2, z}: Dφ̃·e = g, Dφ̃·z = 0; D²φ̃ z = −Dφ̃ (Euler relation).
  Eigen::Matrix3d E;
  E << e1.x(), e2.x(), z.x, e1.y(), e2.y(), z.y, e1.z(), e2.z(), z.z;
  const Eigen::Matrix3d Einv = E.inverse();
  const Eigen::Vector3d G = Einv.transpose() * Eigen::Vector3d(g1, g2, 0.0);
  Eigen::Matrix3d B;  // bilinear form in the {e1, e2, z} basis
  B << H11, H12, -g1, H12, H22, -g2, -g1, -g2, 0.0;
  const Eigen::Matrix3d D2 = Einv.transpose() * B * Einv;  // ambient D²φ̃(z)
  // Rescale from z to x = z/r: Dφ̃ has degree −1, D²φ̃ degree −2.
  const Vec3 grad{r * G.x(), r * G.y(), r * G.z()};
  const auto [t1, t2] = basis_at(x);
  const Eigen::Vector3d v1(t1.x(), t1.y(), t1.z()), v2(t2.x(), t2.y(), t2.z());
  Mat2 hess;
  hess.a00 = r * r * v1.dot(D2 * v1);
  hess.a11 = r * r * v2.dot(D2 * v2);
  hess.a01 = hess.a10 = r * r * v1.dot(D2 * v2);
  return {grad - dot(grad, x.vec()) * x.vec(), hess};
}

/// Pointwise Monge–Ampère residual |det(∇²φ + ∇²ₓₓc)| − |det D²ₓᵧc|·f/g on the
/// interior nodes of the mesh.
inline std::vector<PdeNode> pde_residual(const PdeMesh& mesh, const CostParams& params,
                                         const std::function<double(const UnitVec3&)>& f,
                                         const std::function<double(const UnitVec3&)>& g) {
  if (mesh.m < 1 || !(mesh.h > 0.0) || mesh.h > kMaxMeshStep) {
    fail(Errc::MeshTooCoarse, "need m >= 1 and 0 < h <= 0.25");
  }
  std::vector<PdeNode> out;
  for (int a = -mesh.m + 1; a <= mesh.m - 1; ++a) {
    for (int b = -mesh.m + 1; b <= mesh.m - 1; ++b) {
      PdeNode nd;
      nd.a = a;
      nd.b = b;
      nd.x = mesh.node(a, b);
      const auto [grad, hess] = mesh_derivatives(mesh, a, b);
      nd.grad = grad;
      nd.y = forward_explicit(nd.x, {nd.x, grad}, params);
      if (!in_omega(params, cost_args(params, nd.x, nd.y))) {
        fail(Errc::OutsideOmega, "mapped pair outside Omega");
      }
      nd.lhs = std::abs((hess + hessian_xx(params, nd.x, nd.y)).det());
      nd.rhs = mixed_hessian_analytic(nd.x, grad, params) * f(nd.x) / g(nd.y);
      nd.residual = nd.lhs - nd.rhs;
      out.push_back(nd);
    }
  }
  return out;
}

}  // namespace preftrans
