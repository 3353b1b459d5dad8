#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "preftrans/cost.hpp"
#include "preftrans/error.hpp"
#include "preftrans/sphere.hpp"

namespace preftrans {

/// Source S at the origin, target T at l·ê, constant optical path L.
struct SceneConfig {
  CostParams params;

  Vec3 target() const { return params.l() * params.e_hat().vec(); }
};

/// Radial graph d ↦ radius(d)·d around a center point.
struct ReflectorSurface {
  std::vector<UnitVec3> directions;
  std::vector<double> radii;
};

namespace detail {

// (L² − l²) / (2 (L − l d·ê) (1 + eᵘ)), evaluated without overflow for large |u|.
inline double reflector_radius(const SceneConfig& scene, const UnitVec3& d, double u) {
  const double L = scene.params.L(), l = scene.params.l();
  if (!(l < L)) fail(Errc::InvalidScene, "need l < L");
  if (!std::isfinite(u)) fail(Errc::DegenerateInput, "non-finite potential value");
  const double A = L - l * dot(d.vec(), scene.params.e_hat().vec());
  // 1/(1 + eᵘ) as a logistic of −u.
  const double logistic = u > 0 ? std::exp(-u) / (1.0 + std::exp(-u)) : 1.0 / (1.0 + std::exp(u));
  return (L * L - l * l) / (2.0 * A) * logistic;
}

inline ReflectorSurface recover(const std::vector<UnitVec3>& dirs, const std::vector<double>& values,
                                const SceneConfig& scene) {
  if (dirs.size() != values.size()) fail(Errc::DegenerateInput, "directions and values differ in size");
  ReflectorSurface s{dirs, std::vector<double>(dirs.size())};
  for (std::size_t k = 0; k < dirs.size(); ++k) s.radii[k] = reflector_radius(scene, dirs[k], values[k]);
  return s;
}

}  // namespace detail

/// First reflector R₁ = ũ(x)·x from the source-side potential u (u + v = c on
/// the transport graph).
inline ReflectorSurface recover_r1(const std::vector<UnitVec3>& X, const std::vector<double>& u,
                                   const SceneConfig& scene) {
  return detail::recover(X, u, scene);
}

/// Second reflector R₂ = l·ê − ṽ(y)·y from the target-side potential v.
inline ReflectorSurface recover_r2(const std::vector<UnitVec3>& Y, const std::vector<double>& v,
                                   const SceneConfig& scene) {
  return detail::recover(Y, v, scene);
}

inline Vec3 r1_point(const UnitVec3& x, double radius) { return radius * x.vec(); }

inline Vec3 r2_point(const UnitVec3& y, double radius, const SceneConfig& scene) {
  return scene.target() - radius * y.vec();
}

namespace detail {

inline double lookup_radius(const ReflectorSurface& s, const UnitVec3& d) {
  for (std::size_t k = 0; k < s.directions.size(); ++k) {
    if (norm(s.directions[k].vec() - d.vec()) < 1e-12) return s.radii[k];
  }
  fail(Errc::InterpolationError, "direction not among the reflector samples");
}

}  // namespace detail

/// |S R₁| + |R₁ R₂| + |R₂ T| for the ray leaving S along x and reaching T along y.
inline double path_length(const UnitVec3& x, const UnitVec3& y, const ReflectorSurface& r1,
                          const ReflectorSurface& r2, const SceneConfig& scene) {
  const double a = detail::lookup_radius(r1, x);
  const double b = detail::lookup_radius(r2, y);
  return a + norm(r2_point(y, b, scene) - r1_point(x, a)) + b;
}

/// Angles (radians) between the reflected and the actual outgoing ray at R₁
/// and at R₂ for a matched pair (x, y) with potentials u(x) + v(y) = c(x, y).
/// Surface normals come from the radial-graph formula N ∝ d − ∇log ρ(d),
/// with ∇u = ∇ₓc(x, y) and ∇v = ∇ᵧc(x, y).
inline std::array<double, 2> reflection_law_error(const UnitVec3& x, const UnitVec3& y, double u,
                                                  double v, const SceneConfig& scene) {
  const CostParams& P = scene.params;
  const Vec3& e = P.e_hat().vec();
  const double L = P.L(), l = P.l();
  auto grad_log_radius = [&](const UnitVec3& d, double pot, const Vec3& grad_pot) {
    const double t = dot(d.vec(), e);
    const double A = L - l * t;
    const double w = pot > 0 ? 1.0 / (1.0 + std::exp(-pot)) : std::exp(pot) / (1.0 + std::exp(pot));
    return (l / A) * (e - t * d.vec()) - w * grad_pot;
  };
  auto reflect = [](const Vec3& in, const Vec3& n) {
    const Vec3 nh = n / norm(n);
    return in - 2.0 * dot(in, nh) * nh;
  };
  auto angle = [](const Vec3& a, const Vec3& b) {
    return std::atan2(norm(cross(a, b)), dot(a, b));
  };
  const double ra = detail::reflector_radius(scene, x, u);
  const double rb = detail::reflector_radius(scene, y, v);
  const Vec3 R1 = r1_point(x, ra), R2 = r2_point(y, rb, scene);
  const Vec3 d = (R2 - R1) / norm(R2 - R1);

  const Vec3 n1 = x.vec() - grad_log_radius(x, u, grad_x_cost(P, x, y).vec);
  const Vec3 n2 = y.vec() - grad_log_radius(y, v, grad_x_cost(P, y, x).vec);
  return {angle(reflect(x.vec(), n1), d), angle(reflect(d, n2), y.vec())};
}

// --- meshes -----------------------------------------------------------------------

using Triangle = std::array<std::size_t, 3>;

/// Convex-hull triangulation of unit directions, faces oriented outward.
inline std::vector<Triangle> hull_triangulation(const std::vector<UnitVec3>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) fail(Errc::DegenerateMesh, "need at least 3 directions");
  const auto P = [&](std::size_t i) -> const Vec3& { return pts[i].vec(); };
  const double eps = 1e-12;

  // Initial simplex: two distinct points, a third off their line, a fourth off their plane.
  std::size_t i0 = 0, i1 = n, i2 = n, i3 = n;
  for (std::size_t k = 1; k < n && i1 == n; ++k) {
    if (norm(P(k) - P(i0)) > 1e-10) i1 = k;
  }
  for (std::size_t k = 1; k < n && i1 < n && i2 == n; ++k) {
    if (norm(cross(P(i1) - P(i0), P(k) - P(i0))) > 1e-10) i2 = k;
  }
  if (i2 == n) fail(Errc::DegenerateMesh, "directions are collinear");
  const Vec3 n012 = cross(P(i1) - P(i0), P(i2) - P(i0));
  for (std::size_t k = 1; k < n && i3 == n; ++k) {
    if (std::abs(dot(n012, P(k) - P(i0))) > 1e-10 * norm(n012)) i3 = k;
  }
  if (i3 == n) {
    // Coplanar set: fan around the centroid order.
    Vec3 c{};
    for (std::size_t k = 0; k < n; ++k) c += P(k);
    c = c / static_cast<double>(n);
    const Vec3 axis = n012 / norm(n012);
    const Vec3 u = (P(i0) - c) / norm(P(i0) - c);
    const Vec3 w = cross(axis, u);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < n; ++k) {
      order.emplace_back(std::atan2(dot(P(k) - c, w), dot(P(k) - c, u)), k);
    }
    std::sort(order.begin(), order.end());
    std::vector<Triangle> fan;
    for (std::size_t k = 1; k + 1 < order.size(); ++k) {
      fan.push_back({order[0].second, order[k].second, order[k + 1].second});
    }
    return fan;
  }

  const Vec3 inside = (P(i0) + P(i1) + P(i2) + P(i3)) / 4.0;
  std::vector<Triangle> faces;
  auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
    const Vec3 nn = cross(P(b) - P(a), P(c) - P(a));
    if (dot(nn, P(a) - inside) < 0) std::swap(b, c);
    faces.push_back({a, b, c});
  };
  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  for (std::size_t k = 0; k < n; ++k) {
    if (k == i0 || k == i1 || k == i2 || k == i3) continue;
    std::vector<char> visible(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const auto& t = faces[f];
      const Vec3 nn = cross(P(t[1]) - P(t[0]), P(t[2]) - P(t[0]));
      if (dot(nn, P(k) - P(t[0])) > eps * norm(nn)) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) continue;
      const auto& t = faces[f];
      for (int e = 0; e < 3; ++e) edges.emplace(t[e], t[(e + 1) % 3]);
    }
    std::vector<Triangle> kept;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (!visible[f]) kept.push_back(faces[f]);
    }
    for (const auto& [a, b] : edges) {
      if (!edges.count({b, a})) kept.push_back({a, b, k});  // horizon edge keeps its orientation
    }
    faces = std::move(kept);
  }
  return faces;
}

struct ObjMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;  // 0-based
};

inline ObjMesh surface_mesh(const ReflectorSurface& s, const Vec3& center = {}) {
  ObjMesh mesh;
  for (std::size_t k = 0; k < s.directions.size(); ++k) {
    mesh.vertices.push_back(center + s.radii[k] * s.directions[k].vec());
  }
  mesh.faces = hull_triangulation(s.directions);
  return mesh;
}

/// ASCII OBJ with a leading comment line (without the "# " prefix).
inline void write_obj(const ObjMesh& mesh, const std::string& path, const std::string& header) {
  std::ofstream os(path);
  if (!os) fail(Errc::IoError, "cannot open " + path);
  os << "# " << header << '\n';
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    os << buf;
  }
  for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!os) fail(Errc::IoError, "write failed for " + path);
}

inline void export_mesh(const ReflectorSurface& s, const std::string& path, const std::string& header,
                        const Vec3& center = {}) {
  write_obj(surface_mesh(s, center), path, header);
}

inline ObjMesh read_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(Errc::IoError, "cannot open " + path);
  ObjMesh mesh;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x >> v.y >> v.z;
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      Triangle t{};
      for (auto& idx : t) {
        std::string tok;
        ls >> tok;
        idx = std::stoul(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.faces.push_back(t);
    }
    if (ls.fail() && (tag == "v" || tag == "f")) fail(Errc::IoError, "malformed OBJ line: " + line);
  }
  return mesh;
}

}  // namespace preftrans
