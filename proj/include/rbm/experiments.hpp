#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rbm/config.hpp"
#include "rbm/path_io.hpp"
#include "rbm/simulator.hpp"

namespace rbm {

// Estimator-specific settings. Each estimator reads only its own group.
struct EstimatorParams {
  // hitting
  std::vector<double> horizons;
  // occupancy
  std::vector<double> deltas{0.1, 0.05, 0.025, 0.0125};
  // variation
  std::vector<double> ps{1.0, 1.9};
  std::vector<int> levels{6, 7, 8, 9, 10, 11, 12, 13, 14};
  double margin = 0.1;
  // submartingale
  std::string test_function = "f_eps_C";  // f_eps_C | origin_bump
  double f_eps = 0.3;
  double f_C = 2.0;
  std::size_t grid_points = 20;
  bool planted_defect = false;
  // feller
  Vec2 feller_z{0.5, 0.5};
  int k_max = 6;
  double t = 1.0;
  std::size_t null_replicates = 20;
  // scaling
  Vec2 scaling_x{2.0, 1.0};
  // girsanov: quarter disk {x >= 0, y >= 0, |z| <= radius} and the drift
  // whose law is reproduced by reweighting driftless samples.
  double disk_radius = 1.0;
  Vec2 girsanov_mu{0.5, -0.3};
  // esp-check
  double esp_tol = 1e-9;
  std::vector<double> flatness_deltas{0.01, 0.05, 0.1};
  bool random_geometries = false;
  // geometry-audit / condition-audit
  int grid = 50;
  std::size_t trials = 100;
};

struct ExperimentSpec {
  std::string name;
  std::string estimator;
  SimConfig sim;
  EstimatorParams params;
  std::string out_dir = "results";
  PathFormat format = PathFormat::csv;
};

// Valid values of ExperimentSpec::estimator.
const std::vector<std::string>& estimator_names();

// Throws ConfigError (empty name, unknown estimator listing the valid names,
// bad parameters) or RegimeError (reflected mode with alpha >= 2).
void validate(const ExperimentSpec& spec);

// Builds a spec from a parsed config file:
//   [experiment] name, estimator, out, format
//   [geometry]   xi, theta1, theta2 (angles accept "pi*x")
//   [simulation] mu, z0, T, dt, paths, seed, mode, eps_vertex, threads
//   [<estimator>] estimator parameters
// Unknown keys are rejected with their line number.
ExperimentSpec spec_from_config(const ConfigFile& cfg);

// Preset specs: one per theorem-suite section plus "theorem-suite".
std::vector<std::string> preset_names();
ExperimentSpec preset(const std::string& name, std::uint64_t seed = 1);

// Named hard invariant: any failure makes run_experiment return nonzero.
struct Invariant {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct SectionResult {
  nlohmann::json summary;
  std::vector<Table> tables;
  std::vector<Invariant> invariants;
};

// Runs one estimator (not "theorem-suite") and returns its results without
// touching the file system.
SectionResult run_estimator(const ExperimentSpec& spec);

struct RunOptions {
  // Called after each section with its name and wall-clock seconds.
  std::function<void(const std::string&, double)> on_section;
  // Log lines (progress, verdicts); defaults to silence.
  std::function<void(const std::string&)> log;
};

struct RunOutcome {
  int exit_code = 0;
  nlohmann::json summary;
};

// Writes <out_dir>/summary.json and one CSV per table; for "simulate" also
// the paths in spec.format. Exit code 1 iff a hard invariant failed.
// Statistical verdicts are reported but never change the exit code.
RunOutcome run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

// Geometry echo (v1, v2, alpha, regime) used in every summary.
nlohmann::json geometry_json(const WedgeGeometry& g);

}  // namespace rbm
