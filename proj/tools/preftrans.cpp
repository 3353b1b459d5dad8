// preftrans command-line front end.
//
// Exit codes: 0 success, 1 error (bad input, I/O, numerical failure),
// 2 validation failure (a check or precondition did not hold).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "preftrans.hpp"
#include "preftrans/config.hpp"

namespace fs = std::filesystem;
using namespace preftrans;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;

struct Flags {
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> a;
  std::optional<int> n;
  std::optional<int> samples;
  std::optional<int> grid;
  std::optional<double> gamma_fraction;
  // solve
  std::optional<std::string> method;
  std::optional<double> epsilon;
  std::optional<int> max_iter;
  std::optional<double> tol;
  std::vector<double> center;
  bool force = false;
  std::string mu, nu;
  // reflectors
  std::string instance;
};

RunConfig effective_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : parse_run_config(read_file(f.config), f.config);
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.seed) c.seed = *f.seed;
  if (f.a) {
    if (!(*f.a >= 0.0 && *f.a < 1.0)) fail(Errc::ConfigError, "--a: need 0 <= a < 1");
    c.cost = CostParams(c.cost.L(), *f.a * c.cost.L(), c.cost.e_hat());
  }
  if (f.n) c.profile_points = *f.n;
  if (f.samples) c.samples = *f.samples;
  if (f.grid) c.bounds_grid = *f.grid;
  if (f.gamma_fraction) c.gamma_fraction = *f.gamma_fraction;
  if (f.method) c.solver.method = *f.method;
  if (f.epsilon) c.solver.sinkhorn.epsilon = *f.epsilon;
  if (f.max_iter) c.solver.sinkhorn.max_iter = *f.max_iter;
  if (f.tol) c.solver.sinkhorn.tol = *f.tol;
  if (!f.center.empty()) c.solver.center = Vec3{f.center[0], f.center[1], f.center[2]};
  if (f.force) c.solver.force = true;
  if (!(c.gamma_fraction > 0.0 && c.gamma_fraction < 1.0)) fail(Errc::ConfigError, "gamma fraction must be in (0, 1)");
  return c;
}

std::string out_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

void write_json(const RunConfig& c, const std::string& name, Json body) {
  Json doc{{"header", output_header(c).line()}};
  for (auto& [k, v] : body.items()) doc[k] = v;
  write_file(out_path(c, name), doc.dump(2) + "\n");
}

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

void warn_range(const RunConfig& c) {
  if (!c.cost.in_determinant_range()) {
    std::cerr << "warning: a = " << c.cost.a()
              << " lies outside (1/3, 1/sqrt(2)); the y.p_hat != 0 argument is not guaranteed there\n";
  }
}

Json bounds_json(const DomainBounds& b) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"p1", b.p1},           {"p2", opt(b.p2)},         {"p3", opt(b.p3)},
              {"p_tilde", b.p_tilde}, {"p_tilde1", b.p_tilde1},  {"p_tilde2", b.p_tilde2},
              {"p_star", b.p_star},   {"xi_star1", b.xi_star1},  {"xi_star2", b.xi_star2},
              {"xi_star", b.xi_star}, {"support_radius", b.support_radius()}};
}

// --- subcommands ----------------------------------------------------------------

int cmd_domain_bounds(const RunConfig& c) {
  warn_range(c);
  const auto b = domain_bounds(c.cost, c.bounds_grid);
  write_json(c, "domain_bounds.json",
             Json{{"cost", to_json(c.cost)}, {"a", c.cost.a()}, {"grid", c.bounds_grid}, {"bounds", bounds_json(b)}});
  const double gamma = c.gamma_fraction * b.p_star;
  CsvBuilder csv(output_header(c), "x_theta,x_phi,phat_angle,radius_rad");
  for (const auto& r : build_d_gamma(c.cost, b, gamma, c.mtw_grid.n_x)) {
    csv.row(r.x_theta, r.x_phi, r.phat_angle, r.radius_rad);
  }
  write_file(out_path(c, "d_gamma.csv"), csv.str());
  std::printf("p* = %.10g, xi* = %.10g, support radius = %.10g rad\n", b.p_star, b.xi_star, b.support_radius());
  return kExitOk;
}

int cmd_map_roundtrip(const RunConfig& c) {
  warn_range(c);
  const double p_max = 0.9 * domain_bounds(c.cost, c.bounds_grid).p_star;
  Rng rng(c.seed);
  CsvBuilder csv(output_header(c), "idx,x_x,x_y,x_z,p_x,p_y,p_z,y_x,y_y,y_z,roundtrip_err,newton_gap_rad");
  double worst_rt = 0.0, worst_gap = 0.0;
  for (int k = 0; k < c.samples; ++k) {
    const UnitVec3 x = rng.on_sphere();
    const TangentVector p{x, rng.tangent(x, p_max)};
    const UnitVec3 y = forward_explicit(x, p, c.cost);
    const double rt = norm(inverse_map(x, y, c.cost).vec - p.vec);
    const double gap = geodesic_distance(y, forward_newton(x, p, c.cost));
    worst_rt = std::max(worst_rt, rt);
    worst_gap = std::max(worst_gap, gap);
    csv.row(k, x.x(), x.y(), x.z(), p.vec.x, p.vec.y, p.vec.z, y.x(), y.y(), y.z(), rt, gap);
  }
  write_file(out_path(c, "map_roundtrip.csv"), csv.str());
  std::printf("max roundtrip error %.3g, max explicit/Newton gap %.3g rad (tolerance %.3g)\n", worst_rt, worst_gap,
              c.roundtrip_tol);
  return worst_rt < c.roundtrip_tol && worst_gap < c.roundtrip_tol ? kExitOk : kExitValidation;
}

Json sample_json(const CurvatureSample& s) {
  return Json{{"x", vec_json(s.x)}, {"p", vec_json(s.p)}, {"xi", vec_json(s.xi)}, {"eta", vec_json(s.eta)},
              {"value", s.value}};
}

int cmd_mtw_report(const RunConfig& c) {
  warn_range(c);
  const auto b = domain_bounds(c.cost, c.bounds_grid);
  const auto rep = mtw_scan(c.cost, b, c.gamma_fraction * b.p_star, c.mtw_grid);
  Json body{{"sign_convention", rep.sign_convention},
            {"cost", to_json(c.cost)},
            {"gamma", rep.gamma},
            {"grid", {c.mtw_grid.n_x, c.mtw_grid.n_dir, c.mtw_grid.n_rad, c.mtw_grid.n_pairs}},
            {"samples", rep.samples},
            {"a1_min_separation", rep.a1_min_separation},
            {"a2_min_abs_det", rep.a2_min_abs},
            {"a2_max_rel_gap", rep.a2_max_rel_gap},
            {"csc_min", rep.csc_min},
            {"csc_max", rep.csc_max},
            {"aw_holds", rep.aw_holds}};
  body["counterexample"] = rep.counterexample ? sample_json(*rep.counterexample) : Json(nullptr);
  if (rep.axis_counterexample) {
    Json ax = sample_json(*rep.axis_counterexample);
    ax["reduced_value"] = csc_reduced_axis(*rep.axis_counterexample, c.cost);
    body["axis_sample"] = ax;
  } else {
    body["axis_sample"] = nullptr;
  }
  write_json(c, "mtw_report.json", body);
  std::printf("%zu samples, csc in [%.6g, %.6g], Aw %s\n", rep.samples, rep.csc_min, rep.csc_max,
              rep.aw_holds ? "holds on the scan" : "violated");
  return kExitOk;
}

int cmd_f11_profile(const RunConfig& c) {
  const auto prof = f11_profile(c.cost.a(), c.profile_points);
  CsvBuilder csv(output_header(c), "p_norm,f11");
  for (const auto& pt : prof) csv.row(pt.p_norm, pt.f11);
  write_file(out_path(c, "f11_profile.csv"), csv.str());
  std::printf("second difference at 0: %.10g\n", profile_second_difference_at_zero(prof));
  return kExitOk;
}

int cmd_csc_scan(const RunConfig& c) {
  warn_range(c);
  const auto b = domain_bounds(c.cost, c.bounds_grid);
  CsvBuilder csv(output_header(c), "x_x,x_y,x_z,p_x,p_y,p_z,xi_x,xi_y,xi_z,eta_x,eta_y,eta_z,value");
  for (const auto& s : csc_scan(c.cost, b, c.gamma_fraction * b.p_star, c.mtw_grid)) {
    csv.row(s.x.x(), s.x.y(), s.x.z(), s.p.x, s.p.y, s.p.z, s.xi.x, s.xi.y, s.xi.z, s.eta.x, s.eta.y, s.eta.z,
            s.value);
  }
  write_file(out_path(c, "csc_scan.csv"), csv.str());
  return kExitOk;
}

Json measure_json(const DiscreteMeasure& m) {
  Json pts = Json::array();
  for (const auto& p : m.points) pts.push_back(vec_json(p));
  return Json{{"points", pts}, {"weights", m.weights}};
}

int cmd_solve(const RunConfig& c, const Flags& f) {
  warn_range(c);
  const auto b = domain_bounds(c.cost, c.bounds_grid);
  const UnitVec3 center = c.solver.center ? normalize(*c.solver.center) : c.cost.e_hat();
  DiscreteMeasure mu, nu;
  if (!f.mu.empty() || !f.nu.empty()) {
    if (f.mu.empty() || f.nu.empty()) fail(Errc::ConfigError, "--mu and --nu must be given together");
    mu = read_measure(f.mu);
    nu = read_measure(f.nu);
  } else {
    Rng rng(c.seed);
    auto inst = random_instance(rng, center, b.support_radius(), static_cast<std::size_t>(c.instance_size));
    mu = std::move(inst.mu);
    nu = std::move(inst.nu);
  }
  validate_measure(mu);
  validate_measure(nu);
  if (!support_ball_check(mu, nu, center, b)) {
    if (!c.solver.force) {
      std::fprintf(stderr,
                   "error: support leaves the geodesic ball of radius arccos(xi*)/2 = %.10g rad around the center "
                   "(xi* = %.10g); pass --force to solve anyway\n",
                   b.support_radius(), b.xi_star);
      return kExitValidation;
    }
    std::fprintf(stderr, "warning: support outside the ball of radius %.10g rad, solving because of --force\n",
                 b.support_radius());
  }
  const CostMatrix C = cost_matrix(c.cost, mu.points, nu.points);
  TransportPlan plan;
  Potentials pot;
  Json report{{"method", c.solver.method}};
  if (c.solver.method == "lp") {
    const auto r = solve_lp(mu, nu, C);
    plan = r.plan;
    pot = r.potentials;
    report["primal"] = r.primal;
    report["dual"] = r.dual;
  } else {
    const auto r = solve_sinkhorn(mu, nu, C, c.solver.sinkhorn);
    plan = r.plan;
    pot = r.potentials;
    report["objective"] = r.objective;
    report["marginal_residual"] = r.marginal_residual;
    report["iterations"] = r.iterations;
    report["converged"] = r.converged;
    if (!r.converged) std::fprintf(stderr, "warning: Sinkhorn did not reach tol %.3g\n", c.solver.sinkhorn.tol);
  }
  report["marginal_error"] = marginal_error(plan, mu, nu);
  const auto gsc = generalized_solution_check(plan, pot, C, nu, c.contact_tol);
  report["contact_pairs"] = gsc.contact.size();
  report["support_violations"] = gsc.support_violations;
  report["pushforward_violations"] = gsc.pushforward_violations;
  report["support_radius"] = b.support_radius();
  report["center"] = vec_json(center);

  const OutputHeader header = output_header(c);
  write_file(out_path(c, "plan.csv"), plan_csv(plan, header));
  CsvBuilder pcsv(header, "side,idx,value");
  for (std::size_t i = 0; i < pot.u.size(); ++i) pcsv.row("u", i, pot.u[i]);
  for (std::size_t j = 0; j < pot.v.size(); ++j) pcsv.row("v", j, pot.v[j]);
  write_file(out_path(c, "potentials.csv"), pcsv.str());
  write_json(c, "solve_report.json", report);

  Json entries = Json::array();
  for (const auto& e : plan.entries) entries.push_back(Json::array({e.i, e.j, e.mass}));
  write_json(c, "instance.json",
             Json{{"cost", to_json(c.cost)},
                  {"mu", measure_json(mu)},
                  {"nu", measure_json(nu)},
                  {"potentials", {{"u", pot.u}, {"v", pot.v}}},
                  {"plan", entries}});
  std::printf("%s solve: %zu plan entries, marginal error %.3g\n", c.solver.method.c_str(), plan.entries.size(),
              report["marginal_error"].get<double>());
  return kExitOk;
}

int cmd_reflectors(const RunConfig& c, const Flags& f) {
  const std::string path = f.instance.empty() ? out_path(c, "instance.json") : f.instance;
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, path + ": " + e.what());
  }
  const detail::ConfigReader rd(text, path);
  const SceneConfig scene{cost_params_from_json(j.at("cost"), rd, "cost")};
  auto measure = [&](const char* key) { return parse_measure_json(j.at(key).dump(), path + " " + key); };
  const DiscreteMeasure mu = measure("mu"), nu = measure("nu");
  const auto u = j.at("potentials").at("u").get<std::vector<double>>();
  const auto v = j.at("potentials").at("v").get<std::vector<double>>();
  const auto r1 = recover_r1(mu.points, u, scene);
  const auto r2 = recover_r2(nu.points, v, scene);

  const OutputHeader header = output_header(c);
  export_mesh(r1, out_path(c, "r1.obj"), header.line());
  // R₂ is the radial graph around T along −y.
  ReflectorSurface r2_mesh = r2;
  for (auto& d : r2_mesh.directions) d = -d;
  export_mesh(r2_mesh, out_path(c, "r2.obj"), header.line(), scene.target());

  CsvBuilder csv(header, "x_idx,y_idx,path_length");
  const double L = scene.params.L();
  double worst = 0.0;
  for (const auto& e : j.at("plan")) {
    const auto i = e.at(0).get<std::size_t>(), k = e.at(1).get<std::size_t>();
    if (i >= mu.size() || k >= nu.size()) fail(Errc::ConfigError, path + ": plan index out of range");
    const double len = path_length(mu.points[i], nu.points[k], r1, r2, scene);
    worst = std::max(worst, std::abs(len - L));
    csv.row(i, k, len);
  }
  write_file(out_path(c, "path_validation.csv"), csv.str());
  std::printf("max |path - L| / L = %.3g (tolerance %.3g)\n", worst / L, c.path_tol);
  return worst / L < c.path_tol ? kExitOk : kExitValidation;
}

int cmd_validate(const RunConfig& c) {
  Json checks = Json::array();
  bool all = true;
  int idx = 1;
  for (const auto& check : all_checks(c.seed)) {
    const CheckResult r = check();
    all = all && r.passed;
    std::printf("%s %2d %s: %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", idx, r.name.c_str(), r.detail.c_str(),
                r.seconds);
    checks.push_back(Json{{"index", idx}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    ++idx;
  }
  write_json(c, "validate.json", Json{{"all_passed", all}, {"checks", checks}});
  return all ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal transport with a preferential direction on S^2"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "preftrans " + std::string(kVersion));

  Flags f;
  app.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out-dir", f.out_dir, "Directory for output files");
  app.add_option("--seed", f.seed, "RNG seed");
  app.add_option("--a", f.a, "Ratio l/L (keeps L from the config)");

  auto* bounds = app.add_subcommand("domain-bounds", "Admissible |p| and x.y bounds, D_gamma table");
  bounds->add_option("--grid", f.grid, "Rays per axis of the bounds scan (>= 32)");
  bounds->add_option("--gamma-fraction", f.gamma_fraction, "gamma as a fraction of p*");

  auto* roundtrip = app.add_subcommand("map-roundtrip", "Forward/inverse map roundtrip on random (x, p)");
  roundtrip->add_option("--samples", f.samples, "Number of random samples");

  auto* mtw = app.add_subcommand("mtw-report", "A1/A2/Aw scan over D_gamma");
  mtw->add_option("--gamma-fraction", f.gamma_fraction, "gamma as a fraction of p*");

  auto* profile = app.add_subcommand("f11-profile", "f11 along the axis x = -e");
  profile->add_option("--n", f.n, "Number of profile points");

  auto* csc = app.add_subcommand("csc-scan", "Cost-sectional curvature samples over D_gamma");
  csc->add_option("--gamma-fraction", f.gamma_fraction, "gamma as a fraction of p*");

  auto* solve = app.add_subcommand("solve", "Discrete transport between two measures");
  solve->add_option("--mu", f.mu, "Source measure (CSV x,y,z,weight or JSON)");
  solve->add_option("--nu", f.nu, "Target measure (CSV x,y,z,weight or JSON)");
  solve->add_option("--method", f.method, "lp or sinkhorn")->check(CLI::IsMember({"lp", "sinkhorn"}));
  solve->add_option("--epsilon", f.epsilon, "Final Sinkhorn regularization");
  solve->add_option("--max-iter", f.max_iter, "Sinkhorn iterations per epsilon stage");
  solve->add_option("--tol", f.tol, "Sinkhorn marginal tolerance");
  solve->add_option("--center", f.center, "Support-ball center x0 (three numbers)")->expected(3);
  solve->add_flag("--force", f.force, "Solve even if the supports leave the support ball");

  auto* refl = app.add_subcommand("reflectors", "Reflector meshes and path-length validation");
  refl->add_option("--instance", f.instance, "Solved instance JSON (default <out-dir>/instance.json)");

  auto* validate = app.add_subcommand("validate", "Run the built-in end-to-end checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    const RunConfig c = effective_config(f);
    if (bounds->parsed()) return cmd_domain_bounds(c);
    if (roundtrip->parsed()) return cmd_map_roundtrip(c);
    if (mtw->parsed()) return cmd_mtw_report(c);
    if (profile->parsed()) return cmd_f11_profile(c);
    if (csc->parsed()) return cmd_csc_scan(c);
    if (solve->parsed()) return cmd_solve(c, f);
    if (refl->parsed()) return cmd_reflectors(c, f);
    if (validate->parsed()) return cmd_validate(c);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
