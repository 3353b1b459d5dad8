#pragma once

// JSON run configuration. Needs the nlohmann single header (vendor/json.hpp)
// on the include path; nothing else in the library depends on it.

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "preftrans/error.hpp"
#include "preftrans/io.hpp"
#include "preftrans/mapping.hpp"
#include "preftrans/mtw.hpp"
#include "preftrans/transport.hpp"

namespace preftrans {

using Json = nlohmann::ordered_json;

struct SolverConfig {
  std::string method = "lp";  // lp | sinkhorn
  SinkhornOptions sinkhorn;
  std::optional<Vec3> center;  // support-ball center, default ê
  bool force = false;
};

struct RunConfig {
  CostParams cost{1.0, 0.5, UnitVec3()};
  int bounds_grid = kDefaultBoundsGrid;
  GridSpec mtw_grid;
  double gamma_fraction = 0.5;  // γ = fraction · p*
  int samples = 10000;
  int profile_points = 100;
  int instance_size = 50;  // random instance when no measures are given
  SolverConfig solver;
  double contact_tol = 1e-7;
  double roundtrip_tol = 1e-9;
  double path_tol = 1e-5;  // relative to L
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

inline Json to_json(const CostParams& p) {
  const Vec3& e = p.e_hat().vec();
  return Json{{"L", p.L()}, {"l", p.l()}, {"e_hat", {e.x, e.y, e.z}}};
}

/// Everything that affects results. out_dir is left out so the same run
/// written to two directories produces identical bytes.
inline Json to_json(const RunConfig& c) {
  Json solver{{"method", c.solver.method},
              {"epsilon", c.solver.sinkhorn.epsilon},
              {"epsilon_start", c.solver.sinkhorn.epsilon_start},
              {"max_iter", c.solver.sinkhorn.max_iter},
              {"tol", c.solver.sinkhorn.tol},
              {"force", c.solver.force}};
  if (c.solver.center) solver["center"] = {c.solver.center->x, c.solver.center->y, c.solver.center->z};
  return Json{{"cost", to_json(c.cost)},
              {"bounds_grid", c.bounds_grid},
              {"mtw_grid",
               {{"n_x", c.mtw_grid.n_x},
                {"n_dir", c.mtw_grid.n_dir},
                {"n_rad", c.mtw_grid.n_rad},
                {"n_pairs", c.mtw_grid.n_pairs}}},
              {"gamma_fraction", c.gamma_fraction},
              {"samples", c.samples},
              {"profile_points", c.profile_points},
              {"instance_size", c.instance_size},
              {"solver", solver},
              {"contact_tol", c.contact_tol},
              {"roundtrip_tol", c.roundtrip_tol},
              {"path_tol", c.path_tol},
              {"seed", c.seed}};
}

inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a64(to_json(c).dump()); }

inline OutputHeader output_header(const RunConfig& c) { return {config_hash(c), c.seed}; }

namespace detail {

// 1-based line of the first occurrence of "key" in the source, 0 if absent.
inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void error(const std::string& field, const std::string& msg) const {
    const auto leaf = field.substr(field.rfind('.') + 1);
    const int line = line_of_key(text_, leaf);
    fail(Errc::ConfigError, source_ + (line ? ":" + std::to_string(line) : std::string()) + ": field '" +
                                field + "': " + msg);
  }

  void check_keys(const Json& obj, const std::string& prefix, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) error(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) error(prefix.empty() ? k : prefix + "." + k, "unknown field");
    }
  }

  double number(const Json& obj, const std::string& key, const std::string& path, double fallback) const {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) error(path, "expected a number");
    return obj[key].get<double>();
  }

  double positive(const Json& obj, const std::string& key, const std::string& path, double fallback) const {
    const double v = number(obj, key, path, fallback);
    if (!(v > 0.0)) error(path, "must be > 0");
    return v;
  }

  long long integer(const Json& obj, const std::string& key, const std::string& path, long long fallback,
                    long long min_value) const {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) error(path, "expected an integer");
    const long long v = obj[key].get<long long>();
    if (v < min_value) error(path, "must be >= " + std::to_string(min_value));
    return v;
  }

  Vec3 vec3(const Json& obj, const std::string& key, const std::string& path) const {
    const Json& a = obj[key];
    if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number()) {
      error(path, "expected [x, y, z]");
    }
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  }

 private:
  const std::string& text_;
  std::string source_;
};

}  // namespace detail

inline CostParams cost_params_from_json(const Json& j, const detail::ConfigReader& rd,
                                        const std::string& prefix) {
  rd.check_keys(j, prefix, {"L", "l", "e_hat"});
  const double L = rd.positive(j, "L", prefix + ".L", 1.0);
  const double l = rd.number(j, "l", prefix + ".l", 0.5 * L);
  Vec3 e{0.0, 0.0, 1.0};
  if (j.contains("e_hat")) e = rd.vec3(j, "e_hat", prefix + ".e_hat");
  if (!(norm(e) > 1e-14)) rd.error(prefix + ".e_hat", "zero vector");
  if (!(l >= 0.0 && l < L)) rd.error(prefix + ".l", "need 0 <= l < L");
  return CostParams(L, l, normalize(e));
}

/// Parses a JSON config. Errors carry "source:line" and the dotted field path.
inline RunConfig parse_run_config(const std::string& text, const std::string& source = "config") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    fail(Errc::ConfigError, source + ":" + std::to_string(line) + ": JSON parse error: " + e.what());
  }
  const detail::ConfigReader rd(text, source);
  rd.check_keys(j, "", {"cost", "bounds_grid", "mtw_grid", "gamma_fraction", "samples", "profile_points",
                        "instance_size", "solver", "contact_tol", "roundtrip_tol", "path_tol", "seed",
                        "out_dir"});
  RunConfig c;
  if (j.contains("cost")) c.cost = cost_params_from_json(j["cost"], rd, "cost");
  c.bounds_grid = static_cast<int>(rd.integer(j, "bounds_grid", "bounds_grid", c.bounds_grid, 32));
  if (j.contains("mtw_grid")) {
    const Json& g = j["mtw_grid"];
    rd.check_keys(g, "mtw_grid", {"n_x", "n_dir", "n_rad", "n_pairs"});
    c.mtw_grid.n_x = static_cast<int>(rd.integer(g, "n_x", "mtw_grid.n_x", c.mtw_grid.n_x, 2));
    c.mtw_grid.n_dir = static_cast<int>(rd.integer(g, "n_dir", "mtw_grid.n_dir", c.mtw_grid.n_dir, 1));
    c.mtw_grid.n_rad = static_cast<int>(rd.integer(g, "n_rad", "mtw_grid.n_rad", c.mtw_grid.n_rad, 1));
    c.mtw_grid.n_pairs = static_cast<int>(rd.integer(g, "n_pairs", "mtw_grid.n_pairs", c.mtw_grid.n_pairs, 1));
  }
  c.gamma_fraction = rd.positive(j, "gamma_fraction", "gamma_fraction", c.gamma_fraction);
  if (!(c.gamma_fraction < 1.0)) rd.error("gamma_fraction", "must be < 1");
  c.samples = static_cast<int>(rd.integer(j, "samples", "samples", c.samples, 1));
  c.profile_points = static_cast<int>(rd.integer(j, "profile_points", "profile_points", c.profile_points, 2));
  c.instance_size = static_cast<int>(rd.integer(j, "instance_size", "instance_size", c.instance_size, 1));
  if (j.contains("solver")) {
    const Json& s = j["solver"];
    rd.check_keys(s, "solver", {"method", "epsilon", "epsilon_start", "max_iter", "tol", "center", "force"});
    if (s.contains("method")) {
      if (!s["method"].is_string()) rd.error("solver.method", "expected a string");
      c.solver.method = s["method"].get<std::string>();
    }
    if (c.solver.method != "lp" && c.solver.method != "sinkhorn") rd.error("solver.method", "must be lp or sinkhorn");
    auto& sk = c.solver.sinkhorn;
    sk.epsilon = rd.positive(s, "epsilon", "solver.epsilon", sk.epsilon);
    sk.epsilon_start = rd.positive(s, "epsilon_start", "solver.epsilon_start", sk.epsilon_start);
    sk.max_iter = static_cast<int>(rd.integer(s, "max_iter", "solver.max_iter", sk.max_iter, 1));
    sk.tol = rd.positive(s, "tol", "solver.tol", sk.tol);
    if (s.contains("center")) c.solver.center = rd.vec3(s, "center", "solver.center");
    if (s.contains("force")) {
      if (!s["force"].is_boolean()) rd.error("solver.force", "expected true or false");
      c.solver.force = s["force"].get<bool>();
    }
  }
  c.contact_tol = rd.positive(j, "contact_tol", "contact_tol", c.contact_tol);
  c.roundtrip_tol = rd.positive(j, "roundtrip_tol", "roundtrip_tol", c.roundtrip_tol);
  c.path_tol = rd.positive(j, "path_tol", "path_tol", c.path_tol);
  c.seed = static_cast<std::uint64_t>(rd.integer(j, "seed", "seed", 0, 0));
  if (j.contains("out_dir")) {
    if (!j["out_dir"].is_string()) rd.error("out_dir", "expected a string");
    c.out_dir = j["out_dir"].get<std::string>();
  }
  return c;
}

/// Measure from JSON {"points": [[x,y,z], ...], "weights": [...]}.
inline DiscreteMeasure parse_measure_json(const std::string& text, const std::string& source) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::ConfigError, source + ": JSON parse error: " + e.what());
  }
  const detail::ConfigReader rd(text, source);
  rd.check_keys(j, "", {"points", "weights"});
  if (!j.contains("points") || !j["points"].is_array()) rd.error("points", "expected an array");
  if (!j.contains("weights") || !j["weights"].is_array()) rd.error("weights", "expected an array");
  DiscreteMeasure m;
  for (std::size_t k = 0; k < j["points"].size(); ++k) {
    const Json wrap{{"p", j["points"][k]}};
    const Vec3 v = rd.vec3(wrap, "p", "points[" + std::to_string(k) + "]");
    if (std::abs(norm(v) - 1.0) > 1e-6) rd.error("points[" + std::to_string(k) + "]", "not a unit vector");
    m.points.push_back(normalize(v));
  }
  for (std::size_t k = 0; k < j["weights"].size(); ++k) {
    if (!j["weights"][k].is_number()) rd.error("weights[" + std::to_string(k) + "]", "expected a number");
    m.weights.push_back(j["weights"][k].get<double>());
  }
  return m;
}

inline DiscreteMeasure read_measure(const std::string& path) {
  const std::string text = read_file(path);
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return is_json ? parse_measure_json(text, path) : parse_measure_csv(text, path);
}

}  // namespace preftrans
