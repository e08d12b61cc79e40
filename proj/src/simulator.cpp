#include "rbm/simulator.hpp"

#include <cstdlib>
#include <sstream>
#include <string>

#include "rbm/errors.hpp"

namespace rbm {

unsigned resolve_threads(unsigned requested) {
  if (const char* env = std::getenv("RBM_WEDGE_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

double SimConfig::effective_eps_vertex() const {
  if (eps_vertex > 0.0) return eps_vertex;
  const double r = norm(z0);
  return 1e-3 * (r > 0.0 ? r : 1.0);
}

std::size_t SimConfig::steps() const {
  const double ratio = T / effective_dt();
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
}

void validate(const SimConfig& cfg) {
  auto fail = [](const std::string& what) { throw ConfigError("invalid simulation config: " + what); };
  if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) fail("T must be positive");
  if (cfg.dt < 0.0 || !std::isfinite(cfg.dt)) fail("dt must be positive");
  if (cfg.T < cfg.effective_dt() * (1.0 - 1e-12)) fail("T must be at least dt");
  if (cfg.n_paths < 1) fail("n_paths must be at least 1");
  if (cfg.eps_vertex < 0.0) fail("eps_vertex must be positive");
  if (!std::isfinite(cfg.mu.x) || !std::isfinite(cfg.mu.y)) fail("mu must be finite");
  if (cfg.geometry.distance_to_wedge(cfg.z0) > 0.0) {
    std::ostringstream msg;
    msg << "z0 = (" << cfg.z0.x << ", " << cfg.z0.y << ") is not in the wedge";
    fail(msg.str());
  }
  if (cfg.mode == Mode::reflected && cfg.geometry.regime() == Regime::at_least_two) {
    std::ostringstream msg;
    msg << "alpha = " << cfg.geometry.alpha()
        << " >= 2: there is no solution to the submartingale problem with drift "
           "(reflected mode unavailable; absorbed mode is)";
    throw RegimeError(msg.str());
  }
}

double girsanov_weight(const Vec2& x_increment, const Vec2& mu, double T) {
  if (mu.x == 0.0 && mu.y == 0.0) return 1.0;
  return std::exp(dot(mu, x_increment) - 0.5 * norm2(mu) * T);
}

double girsanov_weight(const PathSample& path, const Vec2& mu, double T) {
  if (path.X.empty()) return 1.0;
  return girsanov_weight(path.X.back() - path.X.front(), mu, T);
}

PathSample simulate_path(const SimConfig& cfg, std::uint64_t path_index) {
  validate(cfg);
  if (path_index >= cfg.n_paths) throw PreconditionError("simulate_path: path_index out of range");
  const double eps = cfg.effective_eps_vertex();
  const ConstrainingMap map(cfg.geometry, cfg.mode, eps);

  PathSample p;
  p.path_index = path_index;
  p.mode = cfg.mode;
  const std::size_t n = cfg.steps() + 1;
  p.times.reserve(n);
  p.X.reserve(n);
  p.Z.reserve(n);
  p.Y.reserve(n);
  p.eta.reserve(n);
  p.free_push.reserve(n);
  walk_path(cfg, map, path_index, [&](const StepState& s) {
    p.times.push_back(s.t);
    p.X.push_back(s.x);
    p.Z.push_back(s.z);
    p.Y.push_back(s.z - s.x);
    p.eta.push_back(s.eta);
    p.free_push.push_back(s.free_push);
    if (!p.tau0_index && (s.absorbed || norm(s.z) <= eps)) p.tau0_index = s.k;
    return true;
  });
  p.zeta_T = girsanov_weight(p, cfg.mu, cfg.T);
  return p;
}

std::vector<PathSample> batch_simulate(const SimConfig& cfg) {
  validate(cfg);
  std::vector<PathSample> out(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) { out[i] = simulate_path(cfg, i); });
  return out;
}

}  // namespace rbm
