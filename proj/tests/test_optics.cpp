#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "preftrans/optics.hpp"
#include "preftrans/rng.hpp"
#include "preftrans/transport.hpp"
#include "preftrans/validation.hpp"

using namespace preftrans;

namespace {

const UnitVec3 kE = UnitVec3::unchecked({0, 0, 1});

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "preftrans_test_optics";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

struct Solved {
  SceneConfig scene{CostParams(2.0, 1.0, kE)};
  Instance inst;
  LpResult lp;
  ReflectorSurface r1, r2;

  explicit Solved(std::uint64_t seed, std::size_t n = 30) {
    Rng rng(seed);
    inst = random_instance(rng, normalize({0.2, -0.1, 1.0}), domain_bounds(scene.params).support_radius(), n);
    lp = solve_lp(inst.mu, inst.nu, scene.params);
    r1 = recover_r1(inst.mu.points, lp.potentials.u, scene);
    r2 = recover_r2(inst.nu.points, lp.potentials.v, scene);
  }
};

}  // namespace

TEST(Radius, WorkedExample) {
  // L = 2, l = 1, x·ê = 0, u = 0: 3 / (2·2·2).
  const SceneConfig scene{CostParams(2.0, 1.0, kE)};
  const UnitVec3 x = normalize({1, 0, 0});
  const auto s = recover_r1({x}, {0.0}, scene);
  EXPECT_DOUBLE_EQ(s.radii[0], 0.375);
  // Long-double evaluation of the same formula at a generic point.
  const UnitVec3 x2 = normalize({0.3, 0.4, 0.5});
  const long double t = dot(x2.vec(), kE.vec()), u = 0.7L;
  const long double ref = (4.0L - 1.0L) / (2.0L * (2.0L - t) * (1.0L + std::exp(u)));
  EXPECT_NEAR(recover_r1({x2}, {0.7}, scene).radii[0], static_cast<double>(ref), 1e-15);
}

TEST(Radius, LimitsAndMonotonicity) {
  const SceneConfig scene{CostParams(2.0, 1.0, kE)};
  const UnitVec3 x = normalize({0.3, -0.2, 0.6});
  const double t = dot(x.vec(), kE.vec());
  const double cap = 3.0 / (2.0 * (2.0 - t));
  EXPECT_NEAR(recover_r1({x}, {-60.0}, scene).radii[0], cap, 1e-15);
  EXPECT_LT(recover_r1({x}, {60.0}, scene).radii[0], 1e-25);
  EXPECT_GT(recover_r1({x}, {800.0}, scene).radii[0], -1e-300);  // no overflow
  double prev = cap;
  for (double u = -5; u <= 5; u += 0.5) {
    const double r = recover_r2({x}, {u}, scene).radii[0];
    EXPECT_LT(r, prev);
    EXPECT_GT(r, 0.0);
    prev = r;
  }
}

TEST(Radius, ZeroSeparationIgnoresDirection) {
  const SceneConfig scene{CostParams(1.5, 0.0, kE)};
  const auto s = recover_r2({kE, -kE, normalize({1, 0, 0})}, {0.2, 0.2, 0.2}, scene);
  EXPECT_EQ(s.radii[0], s.radii[1]);
  EXPECT_EQ(s.radii[0], s.radii[2]);
}

TEST(Radius, InvalidSceneAndInputs) {
  EXPECT_THROW(CostParams(1.0, 1.0, kE), Error);
  const SceneConfig scene{CostParams(2.0, 1.0, kE)};
  EXPECT_THROW(recover_r1({kE}, {std::nan("")}, scene), Error);
  EXPECT_THROW(recover_r1({kE, -kE}, {0.0}, scene), Error);
}

TEST(PathLength, ConstantOnThePlan) {
  const Solved s(61);
  const double L = s.scene.params.L();
  for (const auto& e : s.lp.plan.entries) {
    // Kantorovich equality on the support.
    EXPECT_NEAR(s.lp.potentials.u[e.i] + s.lp.potentials.v[e.j],
                eval_cost(s.scene.params, s.inst.mu.points[e.i], s.inst.nu.points[e.j]), 1e-8);
    const double len = path_length(s.inst.mu.points[e.i], s.inst.nu.points[e.j], s.r1, s.r2, s.scene);
    EXPECT_NEAR(len, L, 1e-6 * L);
  }
}

TEST(PathLength, DiffersOffTheTransportGraph) {
  const Solved s(62);
  std::set<std::pair<std::size_t, std::size_t>> support;
  for (const auto& e : s.lp.plan.entries) support.emplace(e.i, e.j);
  double worst = 0.0;
  for (std::size_t i = 0; i < s.inst.mu.size(); ++i) {
    for (std::size_t j = 0; j < s.inst.nu.size(); ++j) {
      if (support.count({i, j})) continue;
      worst = std::max(worst, std::abs(path_length(s.inst.mu.points[i], s.inst.nu.points[j], s.r1, s.r2, s.scene) -
                                       s.scene.params.L()));
    }
  }
  EXPECT_GT(worst, 1e-4);
}

TEST(PathLength, UnknownDirectionIsAnInterpolationError) {
  const Solved s(63, 5);
  try {
    path_length(normalize({1, 0, 0}), s.inst.nu.points[0], s.r1, s.r2, s.scene);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InterpolationError);
  }
}

TEST(ReflectionLaw, HoldsOnMatchedPairs) {
  const Solved s(64);
  for (const auto& e : s.lp.plan.entries) {
    const auto err = reflection_law_error(s.inst.mu.points[e.i], s.inst.nu.points[e.j], s.lp.potentials.u[e.i],
                                          s.lp.potentials.v[e.j], s.scene);
    EXPECT_LT(err[0], 1e-3);
    EXPECT_LT(err[1], 1e-3);
  }
}

TEST(Mesh, TetrahedronHasFourFaces) {
  const std::vector<UnitVec3> d{normalize({1, 1, 1}), normalize({1, -1, -1}), normalize({-1, 1, -1}),
                                normalize({-1, -1, 1})};
  const auto faces = hull_triangulation(d);
  EXPECT_EQ(faces.size(), 4u);
  for (const auto& f : faces) {
    const Vec3 n = cross(d[f[1]].vec() - d[f[0]].vec(), d[f[2]].vec() - d[f[0]].vec());
    EXPECT_GT(dot(n, d[f[0]].vec()), 0.0);  // outward
  }
}

// Convex position on the sphere: every point is a hull vertex, F = 2V − 4.
TEST(Mesh, RandomDirectionsGiveClosedTriangulation) {
  Rng rng(65);
  std::vector<UnitVec3> d;
  for (int k = 0; k < 200; ++k) d.push_back(rng.on_sphere());
  const auto faces = hull_triangulation(d);
  EXPECT_EQ(faces.size(), 2 * d.size() - 4);
  std::map<std::pair<std::size_t, std::size_t>, int> edges;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) ++edges[{f[e], f[(e + 1) % 3]}];
  }
  for (const auto& [e, count] : edges) {
    EXPECT_EQ(count, 1);
    EXPECT_EQ(edges.count({e.second, e.first}), 1u);
  }
}

TEST(Mesh, EqualRadiiGiveEqualVertexNorms) {
  Rng rng(66);
  ReflectorSurface s;
  for (int k = 0; k < 20; ++k) s.directions.push_back(rng.on_sphere());
  s.radii.assign(20, 0.8);
  for (const auto& v : surface_mesh(s).vertices) EXPECT_NEAR(norm(v), 0.8, 1e-15);
}

TEST(Mesh, ObjRoundtrip) {
  const Solved s(67, 12);
  const std::string path = temp_path("r1.obj");
  export_mesh(s.r1, path, "test header");
  const ObjMesh back = read_obj(path);
  const ObjMesh orig = surface_mesh(s.r1);
  ASSERT_EQ(back.vertices.size(), orig.vertices.size());
  for (std::size_t k = 0; k < orig.vertices.size(); ++k) {
    EXPECT_LT(norm(back.vertices[k] - orig.vertices[k]), 1e-6);
  }
  EXPECT_EQ(back.faces, orig.faces);
}

TEST(Mesh, Errors) {
  ReflectorSurface two{{kE, -kE}, {1, 1}};
  EXPECT_THROW(surface_mesh(two), Error);
  ReflectorSurface line{{kE, -kE, kE}, {1, 1, 1}};
  EXPECT_THROW(surface_mesh(line), Error);
  ReflectorSurface ok{{kE, normalize({1, 0, 0}), normalize({0, 1, 0})}, {1, 1, 1}};
  EXPECT_EQ(surface_mesh(ok).faces.size(), 1u);
  try {
    export_mesh(ok, "/nonexistent-dir/x.obj", "h");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}
