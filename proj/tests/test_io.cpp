#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rbm/config.hpp"
#include "rbm/errors.hpp"
#include "rbm/experiments.hpp"
#include "rbm/path_io.hpp"

using namespace rbm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rbm_wedge_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string error_of(const std::string& text) {
  try {
    spec_from_config(ConfigFile::parse(text, "exp.ini"));
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

PathSample three_point_path() {
  PathSample p;
  p.path_index = 4;
  p.times = {0.0, 0.5, 1.0};
  p.X = {{1.0, 0.5}, {1.1, -0.2}, {0.9, 0.1}};
  p.Z = {{1.0, 0.5}, {1.1, 0.0}, {0.9, 0.3}};
  p.eta = {{0.0, 0.0}, {0.2, 0.0}, {0.2, 0.0}};
  p.free_push.assign(3, Vec2{});
  for (std::size_t k = 0; k < 3; ++k) p.Y.push_back(p.Z[k] - p.X[k]);
  return p;
}

bool same_dirs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t count_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
  if (names.size() != count_b) return false;
  for (const auto& n : names) {
    if (!fs::exists(b / n) || slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

struct ThreadsEnv {
  ThreadsEnv() {
    if (const char* old = std::getenv("RBM_WEDGE_THREADS")) saved = old, had = true;
    ::unsetenv("RBM_WEDGE_THREADS");
  }
  ~ThreadsEnv() {
    if (had) ::setenv("RBM_WEDGE_THREADS", saved.c_str(), 1);
  }
  std::string saved;
  bool had = false;
};

}  // namespace

TEST_CASE("parse_number") {
  CHECK(parse_number("1.5") == 1.5);
  CHECK(parse_number(" -2e-3 ") == -2e-3);
  CHECK(parse_number("pi") == kPi);
  CHECK(parse_number("pi*0.5") == kPi * 0.5);
  CHECK(parse_number("-pi*0.125") == -kPi * 0.125);
  CHECK(parse_number("0.25*pi") == 0.25 * kPi);
  CHECK_FALSE(parse_number("").has_value());
  CHECK_FALSE(parse_number("pie").has_value());
  CHECK_FALSE(parse_number("1.5x").has_value());
}

TEST_CASE("pi-multiple angles hit alpha = 1 exactly") {
  const ExperimentSpec s = spec_from_config(ConfigFile::parse(
      "[experiment]\nname = a\nestimator = simulate\n[geometry]\nxi = pi*0.5\ntheta1 = pi*0.25\n"
      "theta2 = pi*0.25\n[simulation]\nmode = absorbed\n"));
  CHECK(s.sim.geometry.alpha() == 1.0);
  CHECK(s.sim.geometry.regime() == Regime::one);
}

TEST_CASE("config values and diagnostics") {
  const ConfigFile c = ConfigFile::parse(
      "\xEF\xBB\xBF# comment\n[a]\nx = 3 ; trailing\nlist = 1, 2.5, pi\nr = 6..9\nv = 0.5, -1\n"
      "flag = true\nn = 1e4\n",
      "c.ini");
  CHECK(c.get_number("a", "x", 0) == 3.0);
  CHECK(c.get_numbers("a", "list", {}) == std::vector<double>{1.0, 2.5, kPi});
  CHECK(c.get_ints("a", "r", {}) == std::vector<int>{6, 7, 8, 9});
  CHECK(c.get_vec2("a", "v", {}) == Vec2{0.5, -1.0});
  CHECK(c.get_bool("a", "flag", false));
  CHECK(c.get_unsigned("a", "n", 0) == 10000);
  CHECK(c.get_number("a", "missing", 7.0) == 7.0);
  CHECK(c.get_string("b", "x", "fb") == "fb");

  try {
    c.get_number("a", "v", 0);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("c.ini:6") != std::string::npos);
  }
  CHECK_THROWS_AS(ConfigFile::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::parse("[a]\njunk line\n"), ConfigError);
  CHECK_THROWS_AS(ConfigFile::load("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("unknown keys are rejected with their line") {
  const std::string msg = error_of(
      "[experiment]\nname = a\nestimator = occupancy\n[geometry]\nxi = pi*0.5\n[simulation]\n"
      "pathz = 10\n");
  CHECK(msg.find("exp.ini:7") != std::string::npos);
  CHECK(msg.find("pathz") != std::string::npos);
  CHECK(msg.find("unknown setting") != std::string::npos);
}

TEST_CASE("spec_from_config reads every group") {
  const ExperimentSpec s = spec_from_config(ConfigFile::parse(
      "[experiment]\nname = occ\nestimator = occupancy\nout = here\nformat = jsonl\n"
      "[geometry]\nxi = pi*0.5\ntheta1 = pi*0.125\ntheta2 = pi*0.125\n"
      "[simulation]\nmu = 0.1, 0.2\nz0 = 1, 0.5\nT = 2\ndt = 1e-3\npaths = 50\nseed = 9\nthreads = 3\n"
      "[occupancy]\ndeltas = 0.2, 0.1\n"));
  CHECK(s.name == "occ");
  CHECK(s.estimator == "occupancy");
  CHECK(s.out_dir == "here");
  CHECK(s.format == PathFormat::jsonl);
  CHECK(s.sim.geometry.alpha() == doctest::Approx(0.5));
  CHECK(s.sim.mu == Vec2{0.1, 0.2});
  CHECK(s.sim.T == 2.0);
  CHECK(s.sim.n_paths == 50);
  CHECK(s.sim.seed == 9);
  CHECK(s.sim.threads == 3);
  CHECK(s.params.deltas == std::vector<double>{0.2, 0.1});
}

TEST_CASE("hitting defaults to absorbed mode") {
  const ExperimentSpec s = spec_from_config(ConfigFile::parse(
      "[experiment]\nname = h\nestimator = hitting\n[geometry]\nxi = pi*0.5\n"
      "[simulation]\npaths = 10\n[hitting]\nhorizons = 0.5, 1\n"));
  CHECK(s.sim.mode == Mode::absorbed);
  CHECK(s.params.horizons == std::vector<double>{0.5, 1.0});
}

TEST_CASE("validation errors") {
  const std::string regime = error_of(
      "[experiment]\nname = r\nestimator = occupancy\n[geometry]\nxi = pi*0.25\ntheta1 = pi*0.25\n"
      "theta2 = pi*0.25\n[simulation]\nmode = reflected\nz0 = 1, 0.2\n");
  CHECK(regime.find("there is no solution to the submartingale problem with drift") != std::string::npos);

  ExperimentSpec s = preset("occupancy");
  s.estimator = "nonsense";
  try {
    validate(s);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    for (const auto& n : estimator_names()) CHECK(m.find(n) != std::string::npos);
  }
  s = preset("occupancy");
  s.sim.geometry = build_wedge(kPi / 4, kPi / 4, kPi / 4);
  s.sim.z0 = {1.0, 0.2};
  CHECK_THROWS_AS(validate(s), RegimeError);
  s = preset("hitting_nonpositive");
  s.sim.mode = Mode::reflected;
  CHECK_THROWS_AS(validate(s), ConfigError);
}

TEST_CASE("every preset validates") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    CHECK_NOTHROW(validate(preset(name, 5)));
  }
}

TEST_CASE("CSV export: one row per grid point") {
  const fs::path dir = scratch("csv");
  const std::vector<PathSample> one{three_point_path()};
  export_paths(one, PathFormat::csv, (dir / "p.csv").string());
  const auto l = lines(slurp(dir / "p.csv"));
  REQUIRE(l.size() == 4);
  CHECK(l[0] == "path_index,t,X1,X2,Z1,Z2,eta1,eta2,absorbed");
  CHECK(l[1] == "4,0,1,0.5,1,0.5,0,0,0");
  CHECK(l[2] == "4,0.5,1.1,-0.2,1.1,0,0.2,0,0");

  export_paths({}, PathFormat::csv, (dir / "empty.csv").string());
  CHECK(lines(slurp(dir / "empty.csv")).size() == 1);
}

TEST_CASE("packed-binary round trip is bit-identical") {
  const fs::path dir = scratch("bin");
  SimConfig c;
  c.geometry = build_wedge(kPi / 2, kPi / 4, kPi / 4);
  c.mu = {-0.3, -0.3};
  c.z0 = {0.05, 0.05};
  c.dt = 1e-2;
  c.n_paths = 6;
  c.seed = 8;
  c.mode = Mode::absorbed;
  const auto paths = batch_simulate(c);
  export_paths(paths, PathFormat::bin, (dir / "p.bin").string());
  const auto back = read_packed_paths((dir / "p.bin").string());
  REQUIRE(back.size() == paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    CHECK(back[i].path_index == paths[i].path_index);
    CHECK(back[i].times == paths[i].times);
    CHECK(back[i].tau0_index == paths[i].tau0_index);
    for (std::size_t k = 0; k < paths[i].size(); ++k) {
      CHECK(back[i].X[k] == paths[i].X[k]);
      CHECK(back[i].Z[k] == paths[i].Z[k]);
      CHECK(back[i].eta[k] == paths[i].eta[k]);
    }
  }
  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "NOTAPATHFILE....";
  }
  CHECK_THROWS(read_packed_paths((dir / "bad.bin").string()));
}

TEST_CASE("JSONL export has one record per path") {
  const fs::path dir = scratch("jsonl");
  const std::vector<PathSample> two{three_point_path(), three_point_path()};
  export_paths(two, PathFormat::jsonl, (dir / "p.jsonl").string());
  const auto l = lines(slurp(dir / "p.jsonl"));
  REQUIRE(l.size() == 2);
  const auto j = nlohmann::json::parse(l[0]);
  CHECK(j["path_index"] == 4);
  CHECK(j["t"].size() == 3);
  CHECK(j["Z"][1][1] == 0.0);
  CHECK(j["tau0_index"].is_null());
  CHECK(parse_path_format("packed-binary") == PathFormat::bin);
  CHECK_THROWS_AS(parse_path_format("xml"), ConfigError);
}

TEST_CASE("run_experiment output is reproducible and thread independent") {
  ThreadsEnv env;
  ExperimentSpec s = preset("occupancy", 3);
  s.sim.n_paths = 40;
  s.sim.dt = 1e-3;
  s.sim.threads = 1;
  s.out_dir = scratch("run_a").string();
  const RunOutcome a = run_experiment(s);
  s.out_dir = scratch("run_b").string();
  run_experiment(s);
  s.sim.threads = 4;
  s.out_dir = scratch("run_c").string();
  run_experiment(s);
  CHECK(a.exit_code == 0);
  const fs::path base = fs::temp_directory_path();
  CHECK(fs::exists(base / "rbm_wedge_test_run_a" / "summary.json"));
  CHECK(same_dirs(base / "rbm_wedge_test_run_a", base / "rbm_wedge_test_run_b"));
  CHECK(same_dirs(base / "rbm_wedge_test_run_a", base / "rbm_wedge_test_run_c"));
}

TEST_CASE("simulate writes paths in the requested format") {
  ThreadsEnv env;
  ExperimentSpec s = preset("occupancy", 3);
  s.estimator = "simulate";
  s.sim.n_paths = 3;
  s.sim.dt = 0.25;
  s.format = PathFormat::csv;
  s.out_dir = scratch("simulate").string();
  const RunOutcome r = run_experiment(s);
  CHECK(r.exit_code == 0);
  const auto l = lines(slurp(fs::path(s.out_dir) / "paths.csv"));
  CHECK(l.size() == 1 + 3 * 5);
  const auto summary = nlohmann::json::parse(slurp(fs::path(s.out_dir) / "summary.json"));
  CHECK(summary["geometry"]["alpha"].get<double>() == doctest::Approx(0.5));
}
