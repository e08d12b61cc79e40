#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rbm/geometry.hpp"
#include "rbm/vec2.hpp"

namespace rbm {

enum class Mode { reflected, absorbed };

std::string_view to_string(Mode m);

// Result of constraining one free increment.
//   z_new = target + R d_eta + d_free
// d_eta holds the nonnegative pushing amounts along v1 and v2. d_free is
// nonzero only when the point is sent to the vertex without a nonnegative
// two-edge solution (or on absorption); any direction is admissible there
// because the boundary cone at the vertex is the whole plane.
struct ConstrainedStep {
  Vec2 z_new;
  Vec2 d_eta;
  Vec2 d_free;
  bool absorbed = false;
};

// Stateless one-step constraining map with the per-geometry constants
// precomputed. Construction fails with RegimeError for reflected mode when
// alpha >= 2.
class ConstrainingMap {
 public:
  ConstrainingMap(const WedgeGeometry& g, Mode mode, double eps_vertex);

  const WedgeGeometry& geometry() const { return g_; }
  Mode mode() const { return mode_; }
  double eps_vertex() const { return eps_vertex_; }

  // Membership with a relative slack of a few ulps, so that points the map
  // places on an edge are accepted unchanged on the next step.
  bool admits(const Vec2& p) const;

  // z must already be in S (not re-validated here).
  ConstrainedStep step(const Vec2& z, const Vec2& target) const;

 private:
  struct EdgePush {
    bool valid = false;
    double lambda = 0.0;
    Vec2 point;
  };
  EdgePush push_along(int edge, const Vec2& target) const;
  ConstrainedStep finish(const Vec2& target, Vec2 z_new, Vec2 d_eta, bool solvable) const;

  WedgeGeometry g_;
  Mode mode_;
  double eps_vertex_;
  double det_R_;
};

// Throws DomainError if z is not in S or eps_vertex <= 0, RegimeError in
// reflected mode with alpha >= 2.
ConstrainedStep constrain_step(const WedgeGeometry& g, const Vec2& z, const Vec2& target, Mode mode,
                               double eps_vertex);

struct ConstrainedPath {
  std::vector<Vec2> phi;
  std::vector<Vec2> eta;        // cumulative (eta1, eta2), componentwise nondecreasing
  std::vector<Vec2> free_push;  // cumulative vertex corrections
  // Absorbed mode: first frozen index. Reflected mode: first index inside
  // the eps_vertex ball (diagnostic only).
  std::optional<std::size_t> t0_index;
  double t0 = std::numeric_limits<double>::infinity();

  // Total pushing Y(k) = R eta(k) + free_push(k).
  Vec2 pushing(const WedgeGeometry& g, std::size_t k) const { return g.R() * eta[k] + free_push[k]; }
};

// Applies the constraining map along a sampled free path. `times` must be
// strictly increasing and aligned with psi; psi(0) must lie in S.
ConstrainedPath constrain_path(const WedgeGeometry& g, std::span<const double> times,
                               std::span<const Vec2> psi, Mode mode, double eps_vertex);

struct ConeViolation {
  std::size_t s = 0;  // grid indices of the interval (s, t]
  std::size_t t = 0;
  Vec2 increment;
  double distance = 0.0;
};

struct EspViolationReport {
  double max_decomposition_error = 0.0;
  double containment_violation = 0.0;
  double max_cone_violation = 0.0;
  std::size_t cone_violation_count = 0;
  std::vector<ConeViolation> cone_violations;  // first few, for diagnostics

  bool ok(double tol) const {
    return max_decomposition_error <= tol && containment_violation <= tol &&
           max_cone_violation <= tol;
  }
};

struct EspCheckOptions {
  double tol = 1e-9;
  // Longest interval (in grid steps) checked for the cone condition;
  // 0 checks every pair.
  std::size_t window = 0;
  std::size_t max_reported = 32;
};

// Checks the extended Skorokhod problem conditions on a realized path:
//   1. phi = psi + pushing,  2. phi in S,
//   3. pushing(t) - pushing(s) in co[ U_{u in (s,t]} d(phi(u)) ] for all grid s < t.
EspViolationReport check_esp(const WedgeGeometry& g, std::span<const Vec2> psi,
                             std::span<const Vec2> phi, std::span<const Vec2> eta,
                             std::span<const Vec2> free_push, const EspCheckOptions& opts = {});

}  // namespace rbm
