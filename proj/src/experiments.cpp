#include "rbm/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rbm/errors.hpp"
#include "rbm/estimators.hpp"
#include "rbm/geometry.hpp"
#include "rbm/rng.hpp"
#include "rbm/skorokhod.hpp"
#include "rbm/test_functions.hpp"

namespace rbm {

using nlohmann::json;

namespace {

json vec_json(const Vec2& v) { return json::array({v.x, v.y}); }

json report_json(const EstimateReport& r) {
  json j;
  j["estimate"] = r.estimate;
  j["std_error"] = r.std_error;
  j["ci95"] = json::array({r.ci95.first, r.ci95.second});
  j["n"] = r.n;
  if (!r.theorem_tag.empty()) j["theorem_tag"] = r.theorem_tag;
  return j;
}

// Echo of the simulation settings. The worker count is left out on purpose:
// outputs must not depend on it.
json sim_json(const SimConfig& c) {
  json j;
  j["mu"] = vec_json(c.mu);
  j["z0"] = vec_json(c.z0);
  j["T"] = c.T;
  j["dt"] = c.step_size();
  j["steps"] = c.steps();
  j["n_paths"] = c.n_paths;
  j["seed"] = c.seed;
  j["mode"] = std::string(to_string(c.mode));
  j["eps_vertex"] = c.effective_eps_vertex();
  return j;
}

json expectation(const std::string& claim, bool holds) {
  return json{{"claim", claim}, {"holds", holds}};
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

bool is_one_of(const std::string& s, std::initializer_list<const char*> names) {
  return std::any_of(names.begin(), names.end(), [&](const char* n) { return s == n; });
}

const std::set<std::string>& sectionless_estimators() {
  static const std::set<std::string> s{"geometry-audit", "condition-audit", "theorem-suite"};
  return s;
}

// ---------------------------------------------------------------------------

SectionResult run_simulate(const ExperimentSpec& spec, const std::string& paths_target) {
  const SimConfig& c = spec.sim;
  const WedgeGeometry& g = c.geometry;
  SectionResult out;
  std::optional<PathWriter> writer;
  if (!paths_target.empty()) writer.emplace(paths_target, spec.format);

  Table terminal{"terminal", {"path_index", "Z1", "Z2", "eta1", "eta2", "zeta_T", "tau0"}, {}};
  double max_decomp = 0.0;
  double max_outside = 0.0;
  std::size_t absorbed = 0;
  Vec2 mean_z;
  double mean_zeta = 0.0;
  constexpr std::size_t kChunk = 64;
  std::vector<PathSample> chunk;
  for (std::size_t first = 0; first < c.n_paths; first += kChunk) {
    const std::size_t count = std::min(kChunk, c.n_paths - first);
    chunk.assign(count, PathSample{});
    parallel_for(count, c.threads, [&](std::size_t i) { chunk[i] = simulate_path(c, first + i); });
    for (const PathSample& p : chunk) {
      for (std::size_t k = 0; k < p.size(); ++k) {
        const Vec2 r = p.Z[k] - p.X[k] - g.R() * p.eta[k] - p.free_push[k];
        max_decomp = std::max(max_decomp, norm(r) / std::max(1.0, norm(p.X[k])));
        max_outside = std::max(max_outside, g.distance_to_wedge(p.Z[k]));
      }
      if (p.absorbed_at(p.size() - 1)) ++absorbed;
      mean_z += p.Z.back();
      mean_zeta += p.zeta_T;
      terminal.rows.push_back({static_cast<double>(p.path_index), p.Z.back().x, p.Z.back().y,
                               p.eta.back().x, p.eta.back().y, p.zeta_T,
                               p.tau0_index ? p.times[*p.tau0_index] : -1.0});
      if (writer) writer->write(p);
    }
  }
  if (writer) writer->close();
  const double n = static_cast<double>(c.n_paths);
  out.summary["results"] = {{"absorbed_fraction", static_cast<double>(absorbed) / n},
                            {"mean_Z_T", vec_json((1.0 / n) * mean_z)},
                            {"mean_zeta_T", mean_zeta / n},
                            {"max_decomposition_error", max_decomp},
                            {"max_distance_outside_wedge", max_outside}};
  if (!paths_target.empty()) {
    out.summary["results"]["paths_file"] =
        std::filesystem::path(paths_target).filename().string();
  }
  out.tables.push_back(std::move(terminal));
  out.invariants.push_back({"decomposition Z = X + R eta + free_push", max_decomp <= 1e-9,
                            "max relative residual " + fmt(max_decomp)});
  out.invariants.push_back({"constrained path stays in S", max_outside <= 1e-9,
                            "max distance outside " + fmt(max_outside)});
  return out;
}

SectionResult run_hitting(const ExperimentSpec& spec) {
  const SimConfig& c = spec.sim;
  SectionResult out;
  std::vector<double> horizons = spec.params.horizons;
  if (horizons.empty()) horizons.push_back(c.T);
  const HittingReport r = estimate_hitting_probability(c, horizons);

  json res = report_json(r.primary);
  res["eps_vertex"] = r.eps_vertex;
  res["half_eps"] = report_json(r.half_eps);
  res["vertex_attraction_condition"] = r.vertex_attraction;
  res["by_horizon"] = json::array();
  Table t{"hitting", {"horizon", "estimate", "std_error", "ci_lo", "ci_hi"}, {}};
  bool monotone = true;
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    const auto& h = r.by_horizon[i];
    json e = report_json(h);
    e["horizon"] = horizons[i];
    e.erase("theorem_tag");
    res["by_horizon"].push_back(e);
    t.rows.push_back({horizons[i], h.estimate, h.std_error, h.ci95.first, h.ci95.second});
    if (i > 0 && horizons[i] >= horizons[i - 1] && h.estimate < r.by_horizon[i - 1].estimate) {
      monotone = false;
    }
  }
  out.summary["results"] = res;
  out.tables.push_back(std::move(t));

  // Structural: hitting the eps/2 ball implies hitting the eps ball, and the
  // horizon curve is a CDF of the same paths.
  out.invariants.push_back({"half-eps estimate <= eps estimate",
                            r.half_eps.estimate <= r.primary.estimate,
                            fmt(r.half_eps.estimate) + " <= " + fmt(r.primary.estimate)});
  out.invariants.push_back({"hitting curve nondecreasing in the horizon", monotone, ""});

  json ex = json::array();
  const WedgeGeometry& g = c.geometry;
  if (g.regime() == Regime::nonpositive) {
    ex.push_back(expectation("alpha <= 0: estimate <= 0.01", r.primary.estimate <= 0.01));
  } else if (g.alpha() >= 1.0 - kAlphaTol) {
    if (r.vertex_attraction) {
      ex.push_back(expectation("condition holds: estimate >= 0.95", r.primary.estimate >= 0.95));
    } else {
      ex.push_back(expectation("condition fails: estimate in (0.05, 0.95)",
                               r.primary.estimate > 0.05 && r.primary.estimate < 0.95));
    }
  }
  out.summary["expectations"] = ex;
  return out;
}

SectionResult run_variation(const ExperimentSpec& spec) {
  const SimConfig& c = spec.sim;
  const auto& prm = spec.params;
  if (c.geometry.regime() != Regime::one_to_two) {
    throw RegimeError("variation requires 1 < alpha < 2 (alpha = " + fmt(c.geometry.alpha()) + ")");
  }
  std::vector<double> ps = prm.ps;
  const bool have_two = std::find(ps.begin(), ps.end(), 2.0) != ps.end();
  if (!have_two) ps.push_back(2.0);
  const auto tables = variation_tables(c, ps, prm.levels);

  SectionResult out;
  json sweeps = json::array();
  json ex = json::array();
  Table t{"variation", {"p", "level", "median", "mean"}, {}};
  for (std::size_t a = 0; a < prm.ps.size(); ++a) {
    const VariationSweep s = summarize_growth(ps[a], prm.levels, tables[a], prm.margin);
    sweeps.push_back({{"p", s.p},
                      {"levels", s.mesh_levels},
                      {"median", s.values},
                      {"mean", s.means},
                      {"verdict", std::string(to_string(s.verdict))}});
    for (std::size_t l = 0; l < s.values.size(); ++l) {
      t.rows.push_back({s.p, static_cast<double>(s.mesh_levels[l]), s.values[l], s.means[l]});
    }
    const bool above = s.p > c.geometry.alpha();
    ex.push_back(expectation(
        "p = " + fmt(s.p) + (above ? " > alpha: stabilizing" : " <= alpha: diverging"),
        s.verdict == (above ? Verdict::stabilizing : Verdict::diverging)));
  }
  const auto two = std::find(ps.begin(), ps.end(), 2.0) - ps.begin();
  const VariationSweep z = summarize_decay(2.0, prm.levels, tables[static_cast<std::size_t>(two)]);
  Table zt{"zero_energy", {"level", "median", "mean"}, {}};
  for (std::size_t l = 0; l < z.values.size(); ++l) {
    zt.rows.push_back({static_cast<double>(z.mesh_levels[l]), z.values[l], z.means[l]});
  }
  ex.push_back(expectation("zero energy: V_2 tends to 0", z.verdict == Verdict::stabilizing));
  out.summary["results"] = {{"alpha", c.geometry.alpha()},
                            {"margin", prm.margin},
                            {"sweeps", sweeps},
                            {"zero_energy",
                             {{"levels", z.mesh_levels},
                              {"median", z.values},
                              {"mean", z.means},
                              {"verdict", std::string(to_string(z.verdict))}}}};
  out.summary["expectations"] = ex;
  out.tables.push_back(std::move(t));
  out.tables.push_back(std::move(zt));
  return out;
}

SectionResult run_occupancy(const ExperimentSpec& spec) {
  const auto& deltas = spec.params.deltas;
  const auto reps = occupation_sweep(spec.sim, deltas);
  SectionResult out;
  Table t{"occupancy", {"delta", "mean", "std_error"}, {}};
  json arr = json::array();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    t.rows.push_back({deltas[i], reps[i].estimate, reps[i].std_error});
    json e = report_json(reps[i]);
    e["delta"] = deltas[i];
    arr.push_back(e);
  }
  // Order by decreasing delta for the trend.
  std::vector<std::size_t> order(deltas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return deltas[a] > deltas[b]; });
  bool decreasing = true;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!(reps[order[i]].estimate < reps[order[i - 1]].estimate)) decreasing = false;
  }
  out.summary["results"] = {{"sweep", arr}, {"strictly_decreasing", decreasing}};
  out.summary["expectations"] =
      json::array({expectation("occupation decreases strictly as delta shrinks", decreasing)});
  out.tables.push_back(std::move(t));
  return out;
}

TestFunction build_test_function(const ExperimentSpec& spec) {
  const auto& prm = spec.params;
  const WedgeGeometry& g = spec.sim.geometry;
  if (prm.test_function == "f_eps_C") return make_f_eps_C(g, prm.f_eps, prm.f_C);
  const Vec2 bisector{std::cos(g.xi() / 2), std::sin(g.xi() / 2)};
  return make_origin_bump(g, prm.f_eps, prm.f_C, bisector);
}

json submartingale_json(const SubmartingaleReport& r) {
  return {{"min_z", r.min_z},
          {"argmin_s", r.grid_times.at(r.argmin_s)},
          {"argmin_t", r.grid_times.at(r.argmin_t)},
          {"n", r.n}};
}

SectionResult run_submartingale(const ExperimentSpec& spec) {
  const auto& prm = spec.params;
  const TestFunction f = build_test_function(spec);
  const SubmartingaleReport r = submartingale_check(spec.sim, f, prm.grid_points);

  SectionResult out;
  json res = submartingale_json(r);
  res["test_function"] = f.name;
  res["certificates"] = {f.boundary_certificates[0], f.boundary_certificates[1]};
  res["origin_constancy_radius"] = f.origin_constancy_radius;
  json ex = json::array({expectation("min increment z-score >= -3", r.min_z >= -3.0)});
  Table t{"submartingale", {"t", "mean_M"}, {}};
  std::optional<SubmartingaleReport> planted;
  if (prm.planted_defect) {
    const TestFunction bad = negate(f, spec.sim.geometry);
    planted = submartingale_check(spec.sim, bad, prm.grid_points, true);
    res["planted_defect"] = submartingale_json(*planted);
    res["planted_defect"]["test_function"] = bad.name;
    res["planted_defect"]["certified"] = bad.certified;
    ex.push_back(expectation("planted defect detected: z-score < -3", planted->min_z < -3.0));
    t.columns.push_back("mean_M_planted");
  }
  for (std::size_t i = 0; i < r.grid_times.size(); ++i) {
    t.rows.push_back({r.grid_times[i], r.mean_M[i]});
    if (planted) t.rows.back().push_back(planted->mean_M[i]);
  }
  out.summary["results"] = res;
  out.summary["expectations"] = ex;
  out.tables.push_back(std::move(t));
  out.invariants.push_back({"test function certified", f.certified,
                            "min D1 f = " + fmt(f.boundary_certificates[0]) +
                                ", min D2 f = " + fmt(f.boundary_certificates[1])});
  return out;
}

SectionResult run_feller(const ExperimentSpec& spec) {
  const auto& prm = spec.params;
  const FellerTrend tr = feller_trend(spec.sim, prm.feller_z, prm.k_max, prm.t, prm.null_replicates);
  SectionResult out;
  Table t{"feller", {"k", "distance"}, {}};
  for (std::size_t i = 0; i < tr.k.size(); ++i) t.rows.push_back({double(tr.k[i]), tr.distances[i]});
  out.summary["results"] = {{"z", vec_json(prm.feller_z)},
                            {"t", prm.t},
                            {"k", tr.k},
                            {"distances", tr.distances},
                            {"null_threshold", tr.null_threshold},
                            {"null_replicates", prm.null_replicates},
                            {"decreasing", tr.decreasing}};
  out.summary["expectations"] =
      json::array({expectation("energy distance decreasing in k", tr.decreasing)});
  out.tables.push_back(std::move(t));
  return out;
}

SectionResult run_scaling(const ExperimentSpec& spec) {
  const auto& prm = spec.params;
  const ScalingCheck s = scaling_check(spec.sim, prm.scaling_x, prm.t, prm.null_replicates);
  SectionResult out;
  out.summary["results"] = {{"x", vec_json(prm.scaling_x)},
                            {"t", prm.t},
                            {"distance", s.distance},
                            {"null_threshold", s.null_threshold},
                            {"null_replicates", prm.null_replicates},
                            {"passed", s.passed}};
  out.summary["expectations"] =
      json::array({expectation("scaled law within the same-law null band", s.passed)});
  return out;
}

SectionResult run_girsanov(const ExperimentSpec& spec) {
  const auto& prm = spec.params;
  const double r2 = prm.disk_radius * prm.disk_radius;
  const auto indicator = [r2](const Vec2& z) {
    return z.x >= 0.0 && z.y >= 0.0 && norm2(z) <= r2 ? 1.0 : 0.0;
  };
  const GirsanovCheck gc = girsanov_cross_check(spec.sim, prm.girsanov_mu, indicator);
  SectionResult out;
  out.summary["results"] = {{"drift", vec_json(prm.girsanov_mu)},
                            {"disk_radius", prm.disk_radius},
                            {"reweighted", report_json(gc.reweighted)},
                            {"direct", report_json(gc.direct)},
                            {"z_score", gc.z_score}};
  out.summary["expectations"] =
      json::array({expectation("|reweighted - direct| <= 3 combined SE", std::abs(gc.z_score) <= 3.0)});
  return out;
}

WedgeGeometry random_geometry(std::uint64_t seed, std::uint64_t index) {
  const Philox4x32 gen(seed, 0x6573702d67656f6dULL);
  for (std::uint64_t attempt = 0;; ++attempt) {
    const auto a = gen(index * 64 + attempt);
    const auto b = gen(index * 64 + attempt + 1'000'000'007ULL);
    const double xi = 0.2 + (kTwoPi - 0.4) * to_open_unit(a[0], a[1]);
    const double t1 = (kPi / 2 - 0.05) * (2.0 * to_open_unit(a[2], a[3]) - 1.0);
    const double t2 = (kPi / 2 - 0.05) * (2.0 * to_open_unit(b[0], b[1]) - 1.0);
    if ((t1 + t2) / xi < 1.95) return build_wedge(xi, t1, t2);
  }
}

SectionResult run_esp_check(const ExperimentSpec& spec) {
  const auto& prm = spec.params;
  const SimConfig& base = spec.sim;
  struct PathCheck {
    EspViolationReport esp;
    std::vector<double> flat;
    double alpha = 0.0;
  };
  std::vector<PathCheck> checks(base.n_paths);
  parallel_for(base.n_paths, base.threads, [&](std::size_t i) {
    SimConfig c = base;
    c.threads = 1;
    if (prm.random_geometries) {
      c.geometry = random_geometry(base.seed, i);
      c.z0 = Vec2{std::cos(c.geometry.xi() / 2), std::sin(c.geometry.xi() / 2)};
    }
    const PathSample p = simulate_path(c, i);
    PathCheck pc;
    EspCheckOptions opts;
    opts.tol = prm.esp_tol;
    pc.esp = check_esp(c.geometry, p.X, p.Z, p.eta, p.free_push, opts);
    for (double d : prm.flatness_deltas) pc.flat.push_back(flatness_audit(p, c.geometry, d));
    pc.alpha = c.geometry.alpha();
    checks[i] = std::move(pc);
  });

  double decomp = 0.0, contain = 0.0, cone = 0.0, flat = 0.0;
  std::size_t failing = 0, cone_count = 0, flat_nonzero = 0;
  Table t{"esp", {"path_index", "alpha", "decomposition", "containment", "cone", "flatness_max"}, {}};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& c = checks[i];
    decomp = std::max(decomp, c.esp.max_decomposition_error);
    contain = std::max(contain, c.esp.containment_violation);
    cone = std::max(cone, c.esp.max_cone_violation);
    cone_count += c.esp.cone_violation_count;
    if (!c.esp.ok(prm.esp_tol)) ++failing;
    double fm = 0.0;
    for (double f : c.flat) fm = std::max(fm, f);
    if (fm != 0.0) ++flat_nonzero;
    flat = std::max(flat, fm);
    t.rows.push_back({double(i), c.alpha, c.esp.max_decomposition_error,
                      c.esp.containment_violation, c.esp.max_cone_violation, fm});
  }
  SectionResult out;
  out.summary["results"] = {{"paths", base.n_paths},
                            {"random_geometries", prm.random_geometries},
                            {"tol", prm.esp_tol},
                            {"max_decomposition_error", decomp},
                            {"max_containment_violation", contain},
                            {"max_cone_violation", cone},
                            {"cone_violation_count", cone_count},
                            {"failing_paths", failing},
                            {"flatness_deltas", prm.flatness_deltas},
                            {"max_flatness", flat},
                            {"paths_with_nonzero_flatness", flat_nonzero}};
  out.invariants.push_back({"ESP decomposition, containment and cone conditions", failing == 0,
                            std::to_string(failing) + " failing paths, max violation " +
                                fmt(std::max({decomp, contain, cone}))});
  out.invariants.push_back({"Y flat away from the boundary", flat_nonzero == 0,
                            "max audit " + fmt(flat)});
  out.tables.push_back(std::move(t));
  return out;
}

SectionResult run_geometry_audit(const ExperimentSpec& spec) {
  const int n = spec.params.grid;
  double max_vn = 0.0;
  double max_det_alpha_one = 0.0;
  std::size_t alpha_one_configs = 0, above_one = 0, cone_failures = 0, configs = 0;
  auto xi_at = [n](int i) { return kTwoPi * (i + 0.5) / n; };
  auto theta_at = [n](int j) { return -kPi / 2 + kPi * (j + 0.5) / n; };
  constexpr int kDirections = 65;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const WedgeGeometry g = build_wedge(xi_at(i), theta_at(j), theta_at(k));
        ++configs;
        max_vn = std::max({max_vn, std::abs(dot(g.v1(), g.n1()) - 1.0),
                           std::abs(dot(g.v2(), g.n2()) - 1.0)});
        if (g.alpha() > 1.0 + kAlphaTol) {
          ++above_one;
          const Cone2D c = cone_hull({-g.v1(), -g.v2()});
          for (int d = 0; d < kDirections; ++d) {
            const double phi = g.xi() * d / (kDirections - 1);
            if (!c.contains({std::cos(phi), std::sin(phi)})) {
              ++cone_failures;
              break;
            }
          }
        }
      }
      // alpha = 1 family: theta2 = xi - theta1.
      const double t2 = xi_at(i) - theta_at(j);
      if (std::abs(t2) < kPi / 2) {
        const WedgeGeometry g = build_wedge(xi_at(i), theta_at(j), t2);
        ++alpha_one_configs;
        max_det_alpha_one = std::max(max_det_alpha_one, std::abs(g.R().det()));
      }
    }
  }
  SectionResult out;
  out.summary["results"] = {{"grid", n},
                            {"configs", configs},
                            {"max_abs_v_dot_n_minus_1", max_vn},
                            {"alpha_one_configs", alpha_one_configs},
                            {"max_abs_det_R_alpha_one", max_det_alpha_one},
                            {"alpha_above_one_configs", above_one},
                            {"cone_containment_failures", cone_failures}};
  out.invariants.push_back({"v_i . n_i = 1", max_vn <= 1e-12, "max deviation " + fmt(max_vn)});
  out.invariants.push_back({"det R = 0 at alpha = 1", max_det_alpha_one <= 1e-10,
                            "max |det R| " + fmt(max_det_alpha_one)});
  out.invariants.push_back({"co(-v1, -v2) contains S for alpha > 1", cone_failures == 0,
                            std::to_string(cone_failures) + " failures"});
  return out;
}

SectionResult run_condition_audit(const ExperimentSpec& spec) {
  const Philox4x32 gen(spec.sim.seed, 0x636f6e64ULL);
  std::size_t agree = 0, holds = 0;
  std::uint64_t counter = 0;
  Table t{"condition", {"xi", "theta1", "theta2", "mu1", "mu2", "geometric", "algebraic"}, {}};
  for (std::size_t trial = 0; trial < spec.params.trials; ++trial) {
    WedgeGeometry g;
    while (true) {
      const auto a = gen(counter++);
      const double xi = kPi * to_open_unit(a[0], a[1]);
      const double t1 = (kPi / 2) * (2.0 * to_open_unit(a[2], a[3]) - 1.0);
      const auto b = gen(counter++);
      const double t2 = (kPi / 2) * (2.0 * to_open_unit(b[0], b[1]) - 1.0);
      if ((t1 + t2) / xi > 1.0 + 1e-6) {
        g = build_wedge(xi, t1, t2);
        break;
      }
    }
    const auto m = gen(counter++);
    const double ang = kTwoPi * to_open_unit(m[0], m[1]);
    const double rad = to_open_unit(m[2], m[3]);
    const Vec2 mu{rad * std::cos(ang), rad * std::sin(ang)};
    const bool geo = vertex_attraction_condition(g, mu);
    const bool alg = vertex_attraction_algebraic(g, mu);
    agree += geo == alg;
    holds += geo;
    t.rows.push_back({g.xi(), g.theta1(), g.theta2(), mu.x, mu.y, geo ? 1.0 : 0.0, alg ? 1.0 : 0.0});
  }
  SectionResult out;
  out.summary["results"] = {{"trials", spec.params.trials},
                            {"agreements", agree},
                            {"condition_holds", holds}};
  out.invariants.push_back({"geometric and algebraic conditions agree", agree == spec.params.trials,
                            std::to_string(agree) + "/" + std::to_string(spec.params.trials)});
  out.tables.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------

std::string number_text(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_table(const std::filesystem::path& file, const Table& t) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << number_text(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + file.string() + "' failed");
}

json invariants_json(const std::vector<Invariant>& inv, const std::string& prefix) {
  json arr = json::array();
  for (const auto& i : inv) {
    arr.push_back({{"name", prefix + i.name}, {"passed", i.passed}, {"detail", i.detail}});
  }
  return arr;
}

struct SuiteSection {
  const char* name;
  const char* estimator;
};

// Order matters: section i draws its seed from derive_seed(seed, i + 1).
constexpr SuiteSection kSuite[] = {
    {"geometry", "geometry-audit"},
    {"condition", "condition-audit"},
    {"esp", "esp-check"},
    {"hitting_nonpositive", "hitting"},
    {"hitting_attraction", "hitting"},
    {"hitting_window", "hitting"},
    {"girsanov_alpha_0.5", "girsanov"},
    {"girsanov_alpha_1.5", "girsanov"},
    {"variation", "variation"},
    {"occupancy", "occupancy"},
    {"submartingale", "submartingale"},
    {"feller", "feller"},
    {"scaling", "scaling"},
};

ExperimentSpec suite_section(std::size_t index, std::uint64_t seed) {
  const SuiteSection& s = kSuite[index];
  ExperimentSpec e;
  e.name = s.name;
  e.estimator = s.estimator;
  SimConfig& c = e.sim;
  c.seed = derive_seed(seed, index + 1);
  auto& prm = e.params;
  const std::string name = s.name;
  const double alpha_half = kPi / 8;        // theta for alpha = 0.5 at xi = pi/2
  const double alpha_three_half = 3 * kPi / 8;
  if (name == "esp") {
    c.T = 1.0;
    c.dt = 1.0 / 2000;
    c.n_paths = 1000;
    prm.random_geometries = true;
  } else if (name == "hitting_nonpositive") {
    c.geometry = build_wedge(kPi / 2, -kPi / 8, -kPi / 8);
    c.mu = {-0.2, 0.1};
    c.z0 = {1.0, 0.5};
    c.T = 5.0;
    c.dt = 1e-4;
    c.eps_vertex = 1e-3;
    c.n_paths = 2000;
    c.mode = Mode::absorbed;
  } else if (name == "hitting_attraction" || name == "hitting_window") {
    const double xi = kPi / 4;
    c.geometry = build_wedge(xi, 0.9 * xi, 0.9 * xi);
    c.z0 = {0.5, 0.2};
    c.T = 20.0;
    c.mode = Mode::absorbed;
    prm.horizons = {5.0, 10.0, 20.0};
    if (name == "hitting_attraction") {
      c.n_paths = 2000;
    } else {
      c.mu = 0.5 * Vec2{std::cos(xi / 2), std::sin(xi / 2)};
      c.n_paths = 4000;
    }
  } else if (name == "girsanov_alpha_0.5" || name == "girsanov_alpha_1.5") {
    const double th = name == "girsanov_alpha_0.5" ? alpha_half : alpha_three_half;
    c.geometry = build_wedge(kPi / 2, th, th);
    c.z0 = {0.5, 0.5};
    c.T = 1.0;
    c.dt = 2e-3;
    c.n_paths = 100000;
    prm.girsanov_mu = {0.5, -0.3};
    prm.disk_radius = 1.0;
  } else if (name == "variation") {
    c.geometry = build_wedge(kPi / 2, alpha_three_half, alpha_three_half);
    c.z0 = {0.0, 0.0};
    c.T = 1.0;
    c.dt = std::ldexp(1.0, -16);
    c.n_paths = 200;
    prm.ps = {1.0, 1.9};
    prm.levels = {6, 7, 8, 9, 10, 11, 12, 13, 14};
  } else if (name == "occupancy") {
    c.geometry = build_wedge(kPi / 2, alpha_half, alpha_half);
    c.z0 = {1.0, 0.5};
    c.T = 1.0;
    c.dt = 1e-5;
    c.n_paths = 1000;
    prm.deltas = {0.1, 0.05, 0.025, 0.0125};
  } else if (name == "submartingale") {
    c.geometry = build_wedge(kPi / 2, alpha_half, alpha_half);
    c.mu = {0.1, 0.1};
    c.z0 = {1.0, 0.2};
    c.T = 2.0;
    c.dt = 1e-3;
    c.n_paths = 10000;
    prm.f_eps = 0.3;
    prm.f_C = 2.0;
    prm.grid_points = 20;
    prm.planted_defect = true;
  } else if (name == "feller") {
    c.geometry = build_wedge(kPi / 2, alpha_half, alpha_half);
    c.mu = {0.2, -0.1};
    c.dt = 1e-3;
    c.n_paths = 10000;
    prm.feller_z = {0.5, 0.5};
    prm.k_max = 6;
    prm.t = 1.0;
    prm.null_replicates = 20;
  } else if (name == "scaling") {
    c.geometry = build_wedge(kPi / 2, alpha_half, alpha_half);
    c.dt = 1e-3;
    c.n_paths = 10000;
    prm.scaling_x = {2.0, 1.0};
    prm.t = 1.0;
    prm.null_replicates = 20;
  }
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{
      "simulate",  "hitting",  "variation", "occupancy",      "submartingale",   "feller",
      "scaling",   "esp-check", "girsanov", "geometry-audit", "condition-audit", "theorem-suite"};
  return names;
}

json geometry_json(const WedgeGeometry& g) {
  return {{"xi", g.xi()},
          {"theta1", g.theta1()},
          {"theta2", g.theta2()},
          {"v1", vec_json(g.v1())},
          {"v2", vec_json(g.v2())},
          {"alpha", g.alpha()},
          {"regime", std::string(to_string(g.regime()))}};
}

void validate(const ExperimentSpec& spec) {
  if (spec.name.empty()) throw ConfigError("experiment name must be nonempty");
  const auto& names = estimator_names();
  if (std::find(names.begin(), names.end(), spec.estimator) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown estimator '" + spec.estimator + "' (valid: " + list + ")");
  }
  if (sectionless_estimators().count(spec.estimator)) return;
  validate(spec.sim);

  const auto& prm = spec.params;
  const std::string& e = spec.estimator;
  auto bad = [&](const std::string& what) { throw ConfigError(e + ": " + what); };
  if (e == "hitting") {
    if (spec.sim.mode != Mode::absorbed) bad("requires mode = absorbed");
    for (double h : prm.horizons) {
      if (!(h > 0.0) || h > spec.sim.T) bad("horizons must lie in (0, T]");
    }
  } else if (e == "variation") {
    if (spec.sim.geometry.regime() != Regime::one_to_two) {
      throw RegimeError("variation requires 1 < alpha < 2 (alpha = " +
                        fmt(spec.sim.geometry.alpha()) + ")");
    }
    if (prm.ps.empty() || prm.levels.empty()) bad("p and levels must be nonempty");
    for (double p : prm.ps) {
      if (!(p > 0.0)) bad("p must be positive");
    }
    for (int l : prm.levels) {
      if (l < 0 || l > 40) bad("levels must lie in 0..40");
    }
    const int top = *std::max_element(prm.levels.begin(), prm.levels.end());
    if (spec.sim.steps() % (std::size_t{1} << top) != 0) {
      bad("number of steps (" + std::to_string(spec.sim.steps()) +
          ") must be a multiple of 2^" + std::to_string(top));
    }
  } else if (e == "occupancy") {
    if (prm.deltas.empty()) bad("deltas must be nonempty");
    for (double d : prm.deltas) {
      if (!(d > 0.0)) bad("deltas must be positive");
    }
  } else if (e == "submartingale") {
    if (!is_one_of(prm.test_function, {"f_eps_C", "origin_bump"})) {
      bad("test_function must be f_eps_C or origin_bump");
    }
    if (prm.grid_points < 2) bad("grid_points must be at least 2");
  } else if (e == "feller" || e == "scaling") {
    if (!(prm.t > 0.0)) bad("t must be positive");
    if (prm.null_replicates < 2) bad("null_replicates must be at least 2");
    if (spec.sim.n_paths < 2) bad("paths must be at least 2");
    if (e == "feller" && prm.k_max < 1) bad("k_max must be at least 1");
    if (e == "scaling" && (spec.sim.mu.x != 0.0 || spec.sim.mu.y != 0.0)) bad("requires mu = 0");
  } else if (e == "girsanov") {
    if (!(prm.disk_radius > 0.0)) bad("radius must be positive");
  } else if (e == "esp-check") {
    if (!(prm.esp_tol > 0.0)) bad("tol must be positive");
  }
}

ExperimentSpec spec_from_config(const ConfigFile& cfg) {
  ExperimentSpec spec;
  spec.name = cfg.get_string("experiment", "name");
  spec.estimator = cfg.get_string("experiment", "estimator");
  if (spec.name.empty()) cfg.fail("experiment", "name", "missing or empty");
  if (spec.estimator.empty()) cfg.fail("experiment", "estimator", "missing or empty");
  const auto& names = estimator_names();
  if (std::find(names.begin(), names.end(), spec.estimator) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    cfg.fail("experiment", "estimator", "unknown estimator '" + spec.estimator + "' (valid: " + list + ")");
  }
  const std::string out = cfg.get_string("experiment", "out");
  const std::string format = cfg.get_string("experiment", "format");
  const std::uint64_t seed = cfg.get_unsigned("simulation", "seed", 1);
  const unsigned threads = static_cast<unsigned>(cfg.get_unsigned("simulation", "threads", 0));

  if (spec.estimator == "theorem-suite") {
    const std::string name = spec.name;
    spec = preset("theorem-suite", seed);
    spec.name = name;
  } else {
    if (cfg.has_section("geometry") || !sectionless_estimators().count(spec.estimator)) {
      const double xi = cfg.get_number("geometry", "xi", kPi / 2);
      const double t1 = cfg.get_number("geometry", "theta1", 0.0);
      const double t2 = cfg.get_number("geometry", "theta2", 0.0);
      try {
        spec.sim.geometry = build_wedge(xi, t1, t2);
      } catch (const DomainError& e) {
        cfg.fail("geometry", "xi", e.what());
      }
    }
    SimConfig& c = spec.sim;
    c.mu = cfg.get_vec2("simulation", "mu", c.mu);
    c.z0 = cfg.get_vec2("simulation", "z0", c.z0);
    c.T = cfg.get_number("simulation", "T", c.T);
    c.dt = cfg.get_number("simulation", "dt", c.dt);
    c.n_paths = cfg.get_unsigned("simulation", "paths", c.n_paths);
    c.seed = seed;
    c.eps_vertex = cfg.get_number("simulation", "eps_vertex", c.eps_vertex);
    const std::string mode =
        cfg.get_string("simulation", "mode", spec.estimator == "hitting" ? "absorbed" : "reflected");
    if (mode == "reflected") {
      c.mode = Mode::reflected;
    } else if (mode == "absorbed") {
      c.mode = Mode::absorbed;
    } else {
      cfg.fail("simulation", "mode", "expected reflected or absorbed, got '" + mode + "'");
    }

    auto& p = spec.params;
    p.horizons = cfg.get_numbers("hitting", "horizons", p.horizons);
    p.deltas = cfg.get_numbers("occupancy", "deltas", p.deltas);
    p.ps = cfg.get_numbers("variation", "p", p.ps);
    p.levels = cfg.get_ints("variation", "levels", p.levels);
    p.margin = cfg.get_number("variation", "margin", p.margin);
    p.test_function = cfg.get_string("submartingale", "test_function", p.test_function);
    p.f_eps = cfg.get_number("submartingale", "eps", p.f_eps);
    p.f_C = cfg.get_number("submartingale", "C", p.f_C);
    p.grid_points = cfg.get_unsigned("submartingale", "grid_points", p.grid_points);
    p.planted_defect = cfg.get_bool("submartingale", "planted_defect", p.planted_defect);
    p.feller_z = cfg.get_vec2("feller", "z", p.feller_z);
    p.k_max = static_cast<int>(cfg.get_unsigned("feller", "k_max", p.k_max));
    p.t = cfg.get_number("feller", "t", p.t);
    p.null_replicates = cfg.get_unsigned("feller", "null_replicates", p.null_replicates);
    p.scaling_x = cfg.get_vec2("scaling", "x", p.scaling_x);
    p.t = cfg.get_number("scaling", "t", p.t);
    p.null_replicates = cfg.get_unsigned("scaling", "null_replicates", p.null_replicates);
    p.girsanov_mu = cfg.get_vec2("girsanov", "mu", p.girsanov_mu);
    p.disk_radius = cfg.get_number("girsanov", "radius", p.disk_radius);
    p.esp_tol = cfg.get_number("esp-check", "tol", p.esp_tol);
    p.flatness_deltas = cfg.get_numbers("esp-check", "flatness_deltas", p.flatness_deltas);
    p.random_geometries = cfg.get_bool("esp-check", "random_geometries", p.random_geometries);
    p.grid = static_cast<int>(cfg.get_unsigned("geometry-audit", "grid", p.grid));
    p.trials = cfg.get_unsigned("condition-audit", "trials", p.trials);
  }
  spec.sim.threads = threads;
  if (!out.empty()) spec.out_dir = out;
  if (!format.empty()) {
    try {
      spec.format = parse_path_format(format);
    } catch (const ConfigError& e) {
      cfg.fail("experiment", "format", e.what());
    }
  }
  cfg.reject_unused();
  try {
    validate(spec);
  } catch (const ConfigError& e) {
    throw ConfigError(cfg.source() + ": " + e.what());
  } catch (const RegimeError& e) {
    throw RegimeError(cfg.source() + ": " + e.what());
  }
  return spec;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& s : kSuite) out.emplace_back(s.name);
  out.emplace_back("theorem-suite");
  return out;
}

ExperimentSpec preset(const std::string& name, std::uint64_t seed) {
  if (name == "theorem-suite") {
    ExperimentSpec e;
    e.name = "theorem-suite";
    e.estimator = "theorem-suite";
    e.sim.seed = seed;
    return e;
  }
  for (std::size_t i = 0; i < std::size(kSuite); ++i) {
    if (name == kSuite[i].name) return suite_section(i, seed);
  }
  std::string list;
  for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + name + "' (valid: " + list + ")");
}

SectionResult run_estimator(const ExperimentSpec& spec) {
  validate(spec);
  const std::string& e = spec.estimator;
  SectionResult r;
  if (e == "simulate") {
    r = run_simulate(spec, "");
  } else if (e == "hitting") {
    r = run_hitting(spec);
  } else if (e == "variation") {
    r = run_variation(spec);
  } else if (e == "occupancy") {
    r = run_occupancy(spec);
  } else if (e == "submartingale") {
    r = run_submartingale(spec);
  } else if (e == "feller") {
    r = run_feller(spec);
  } else if (e == "scaling") {
    r = run_scaling(spec);
  } else if (e == "girsanov") {
    r = run_girsanov(spec);
  } else if (e == "esp-check") {
    r = run_esp_check(spec);
  } else if (e == "geometry-audit") {
    r = run_geometry_audit(spec);
  } else if (e == "condition-audit") {
    r = run_condition_audit(spec);
  } else {
    throw ConfigError("run_estimator cannot run '" + e + "'");
  }
  r.summary["estimator"] = e;
  if (!sectionless_estimators().count(e)) {
    r.summary["geometry"] = geometry_json(spec.sim.geometry);
    r.summary["config"] = sim_json(spec.sim);
    if (e == "esp-check" && spec.params.random_geometries) r.summary.erase("geometry");
  } else {
    r.summary["config"] = {{"seed", spec.sim.seed}};
  }
  r.summary["hard_invariants"] = invariants_json(r.invariants, "");
  if (!r.summary.contains("expectations")) r.summary["expectations"] = json::array();
  return r;
}

RunOutcome run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  validate(spec);
  namespace fs = std::filesystem;
  const fs::path dir(spec.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + spec.out_dir + "'");
  }
  auto log = [&](const std::string& s) {
    if (options.log) options.log(s);
  };
  auto timed = [&](const std::string& name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = fn();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (options.on_section) options.on_section(name, secs);
    return r;
  };
  auto report = [&](const std::string& prefix, const SectionResult& r) {
    for (const auto& i : r.invariants) {
      log(prefix + "invariant " + (i.passed ? "ok" : "FAILED") + ": " + i.name +
          (i.detail.empty() ? "" : " (" + i.detail + ")"));
    }
    for (const auto& x : r.summary["expectations"]) {
      log(prefix + "expectation " + (x["holds"].get<bool>() ? "holds" : "does not hold") + ": " +
          x["claim"].get<std::string>());
    }
  };

  json summary;
  summary["name"] = spec.name;
  summary["estimator"] = spec.estimator;
  std::vector<Invariant> all;
  if (spec.estimator == "theorem-suite") {
    summary["seed"] = spec.sim.seed;
    json sections = json::object();
    json order = json::array();
    for (std::size_t i = 0; i < std::size(kSuite); ++i) {
      ExperimentSpec s = suite_section(i, spec.sim.seed);
      s.sim.threads = spec.sim.threads;
      log(std::string("section ") + kSuite[i].name);
      SectionResult r = timed(kSuite[i].name, [&] { return run_estimator(s); });
      report("  ", r);
      for (auto& inv : r.invariants) {
        inv.name = std::string(kSuite[i].name) + ": " + inv.name;
        all.push_back(inv);
      }
      for (const auto& t : r.tables) {
        write_table(dir / (std::string(kSuite[i].name) + "_" + t.name + ".csv"), t);
      }
      sections[kSuite[i].name] = std::move(r.summary);
      order.push_back(kSuite[i].name);
    }
    summary["sections"] = std::move(sections);
    summary["section_order"] = std::move(order);
  } else {
    SectionResult r = timed(spec.estimator, [&] {
      if (spec.estimator == "simulate") {
        const std::string file = (dir / ("paths." + std::string(to_string(spec.format)))).string();
        SectionResult s = run_simulate(spec, file);
        s.summary["estimator"] = spec.estimator;
        s.summary["geometry"] = geometry_json(spec.sim.geometry);
        s.summary["config"] = sim_json(spec.sim);
        s.summary["hard_invariants"] = invariants_json(s.invariants, "");
        s.summary["expectations"] = json::array();
        return s;
      }
      return run_estimator(spec);
    });
    report("", r);
    all = r.invariants;
    for (const auto& t : r.tables) write_table(dir / (t.name + ".csv"), t);
    for (auto& [k, v] : r.summary.items()) summary[k] = v;
  }
  summary["hard_invariants"] = invariants_json(all, "");
  const bool ok = std::all_of(all.begin(), all.end(), [](const Invariant& i) { return i.passed; });
  summary["exit_code"] = ok ? 0 : 1;

  const fs::path file = dir / "summary.json";
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
  out << summary.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + file.string() + "' failed");
  return {ok ? 0 : 1, std::move(summary)};
}

}  // namespace rbm
