#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rbm/geometry.hpp"
#include "rbm/parallel.hpp"
#include "rbm/rng.hpp"
#include "rbm/skorokhod.hpp"
#include "rbm/vec2.hpp"

namespace rbm {

struct SimConfig {
  WedgeGeometry geometry;
  Vec2 mu;                   // drift
  Vec2 z0{1.0, 0.5};         // start point in S
  double T = 1.0;            // horizon
  double dt = 0.0;           // step; 0 selects 1e-4 * T
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  Mode mode = Mode::reflected;
  double eps_vertex = 0.0;   // vertex ball radius; 0 selects 1e-3 * (|z0| or 1)
  unsigned threads = 0;      // 0 = hardware concurrency (see resolve_threads)

  double effective_dt() const { return dt > 0.0 ? dt : 1e-4 * T; }
  double effective_eps_vertex() const;
  // Number of grid steps; the grid is uniform with step T / steps() <= dt.
  std::size_t steps() const;
  double step_size() const { return T / static_cast<double>(steps()); }
};

// Throws ConfigError on invalid values and RegimeError for reflected mode
// with alpha >= 2.
void validate(const SimConfig& cfg);

struct PathSample {
  std::uint64_t path_index = 0;
  Mode mode = Mode::reflected;
  std::vector<double> times;
  std::vector<Vec2> X;          // free path z0 + W(t) + mu t
  std::vector<Vec2> Z;          // constrained path in S
  std::vector<Vec2> Y;          // Z - X
  std::vector<Vec2> eta;        // cumulative pushing along (v1, v2)
  std::vector<Vec2> free_push;  // cumulative vertex corrections
  double zeta_T = 1.0;
  std::optional<std::size_t> tau0_index;

  std::size_t size() const { return times.size(); }
  // Absorbed-mode flag for grid index k.
  bool absorbed_at(std::size_t k) const {
    return mode == Mode::absorbed && tau0_index && k >= *tau0_index;
  }
};

// exp(mu . (X(T) - X(0)) - |mu|^2 T / 2): density of the drift-mu law of
// the free path against the driftless law, evaluated on `path`.
double girsanov_weight(const PathSample& path, const Vec2& mu, double T);
double girsanov_weight(const Vec2& x_increment, const Vec2& mu, double T);

// State handed to path visitors at every grid index k = 0..N.
struct StepState {
  std::size_t k = 0;
  double t = 0.0;
  Vec2 x;
  Vec2 z;
  Vec2 eta;
  Vec2 free_push;
  bool absorbed = false;
  // Increments that produced this state (zero at k = 0).
  Vec2 d_eta;
  Vec2 d_free;
};

// Runs one path of the Euler scheme and calls visit(state) at each grid
// index. The visitor returns false to stop early. The increments are
// mu h + sqrt(h) G_k with G_k drawn from the counter stream (seed, path_index).
template <class Visitor>
void walk_path(const SimConfig& cfg, const ConstrainingMap& map, std::uint64_t path_index,
               Visitor&& visit) {
  const std::size_t n = cfg.steps();
  const double h = cfg.step_size();
  const double sqrt_h = std::sqrt(h);
  const Vec2 drift = h * cfg.mu;
  const GaussianStream gauss(cfg.seed, path_index);

  StepState s;
  s.x = cfg.z0;
  s.z = cfg.z0;
  bool frozen = false;
  if (norm(cfg.z0) <= map.eps_vertex() && cfg.mode == Mode::absorbed) {
    s.absorbed = true;
    frozen = true;
  }
  if (!visit(static_cast<const StepState&>(s))) return;
  for (std::size_t k = 1; k <= n; ++k) {
    const Vec2 dx = drift + sqrt_h * gauss(k - 1);
    const Vec2 target = s.z + dx;
    s.x += dx;
    s.k = k;
    s.t = k == n ? cfg.T : static_cast<double>(k) * h;
    if (frozen) {
      s.d_eta = {};
      s.d_free = -target;
      s.z = {};
    } else {
      const ConstrainedStep st = map.step(s.z, target);
      s.z = st.z_new;
      s.d_eta = st.d_eta;
      s.d_free = st.d_free;
      if (st.absorbed) {
        s.absorbed = true;
        frozen = true;
      }
    }
    s.eta += s.d_eta;
    s.free_push += s.d_free;
    if (!visit(static_cast<const StepState&>(s))) return;
  }
}

// Full path record for path `path_index` (< cfg.n_paths).
PathSample simulate_path(const SimConfig& cfg, std::uint64_t path_index);

// All cfg.n_paths paths ordered by path index; the result does not depend
// on the worker count.
std::vector<PathSample> batch_simulate(const SimConfig& cfg);

// Simulates every path and keeps only fn(path). Paths are generated and
// discarded one at a time per worker, so memory stays bounded.
template <class Fn>
auto map_paths(const SimConfig& cfg, Fn&& fn) {
  validate(cfg);
  using R = decltype(fn(std::declval<const PathSample&>()));
  std::vector<R> out(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads,
               [&](std::size_t i) { out[i] = fn(simulate_path(cfg, i)); });
  return out;
}

// Like map_paths but drives a visitor built by make_visitor() per path
// without materializing the path; collect(visitor) yields the result.
template <class MakeVisitor, class Collect>
auto map_walks(const SimConfig& cfg, MakeVisitor&& make_visitor, Collect&& collect) {
  validate(cfg);
  const ConstrainingMap map(cfg.geometry, cfg.mode, cfg.effective_eps_vertex());
  using V = decltype(make_visitor());
  using R = decltype(collect(std::declval<V&>()));
  std::vector<R> out(cfg.n_paths);
  parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t i) {
    V visitor = make_visitor();
    walk_path(cfg, map, i, visitor);
    out[i] = collect(visitor);
  });
  return out;
}

}  // namespace rbm
