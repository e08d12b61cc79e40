#include "rbm/skorokhod.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

// Relative slack accepted by ConstrainingMap::admits.
constexpr double kAdmitSlack = 1e-13;

void require_in_wedge(const WedgeGeometry& g, const Vec2& z, const char* what) {
  if (g.distance_to_wedge(z) > 1e-12 * std::max(1.0, norm(z))) {
    std::ostringstream msg;
    msg << what << " (" << z.x << ", " << z.y << ") is not in the wedge";
    throw DomainError(msg.str());
  }
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::reflected ? "reflected" : "absorbed"; }

ConstrainingMap::ConstrainingMap(const WedgeGeometry& g, Mode mode, double eps_vertex)
    : g_(g), mode_(mode), eps_vertex_(eps_vertex), det_R_(g.R().det()) {
  if (!(eps_vertex > 0.0)) throw DomainError("eps_vertex must be positive");
  if (mode == Mode::reflected && g.regime() == Regime::at_least_two) {
    std::ostringstream msg;
    msg << "alpha = " << g.alpha()
        << " >= 2: there is no solution to the submartingale problem with drift; "
           "use absorbed mode";
    throw RegimeError(msg.str());
  }
}

bool ConstrainingMap::admits(const Vec2& p) const {
  const double slack = kAdmitSlack * (std::abs(p.x) + std::abs(p.y));
  const bool h1 = p.y >= -slack;
  const bool h2 = dot(g_.n2(), p) >= -slack;
  return g_.convex() ? (h1 && h2) : (h1 || h2);
}

ConstrainingMap::EdgePush ConstrainingMap::push_along(int edge, const Vec2& target) const {
  const Vec2& n = g_.normal(edge);
  const double violation = dot(n, target);
  EdgePush out;
  if (violation >= 0.0) return out;
  const Vec2& v = g_.reflection(edge);
  out.lambda = -violation / dot(n, v);
  const Vec2 landed = target + out.lambda * v;
  const double along = dot(landed, g_.edge_direction(edge));
  if (along < 0.0) return out;
  // Snap onto the edge ray so the point is admitted exactly next step.
  out.point = along * g_.edge_direction(edge);
  out.valid = true;
  return out;
}

ConstrainedStep ConstrainingMap::finish(const Vec2& target, Vec2 z_new, Vec2 d_eta,
                                        bool solvable) const {
  ConstrainedStep out;
  if (mode_ == Mode::absorbed && (!solvable || norm(z_new) <= eps_vertex_)) {
    out.absorbed = true;
    out.d_free = -target;
    return out;
  }
  if (!solvable) {
    // Reflected fallback: d(0) is the whole plane, so any correction that
    // lands on the vertex is admissible.
    out.d_free = -target;
    return out;
  }
  out.z_new = z_new;
  out.d_eta = d_eta;
  return out;
}

ConstrainedStep ConstrainingMap::step(const Vec2& z, const Vec2& target) const {
  if (admits(target)) return finish(target, target, {}, true);

  const EdgePush a = push_along(1, target);
  const EdgePush b = push_along(2, target);
  if (a.valid || b.valid) {
    int edge = a.valid ? 1 : 2;
    if (a.valid && b.valid) {
      // Both single pushes land on their edge: take the edge the segment
      // z -> target crosses first.
      auto crossing = [&](int e) {
        const double nz = dot(g_.normal(e), z);
        const double nt = dot(g_.normal(e), target);
        if (nz < 0.0) return std::numeric_limits<double>::infinity();
        return nz / (nz - nt);
      };
      const double ca = crossing(1);
      const double cb = crossing(2);
      edge = (ca < cb || (ca == cb && a.lambda <= b.lambda)) ? 1 : 2;
    }
    const EdgePush& p = edge == 1 ? a : b;
    const Vec2 d_eta = edge == 1 ? Vec2{p.lambda, 0.0} : Vec2{0.0, p.lambda};
    return finish(target, p.point, d_eta, true);
  }

  // Two-edge push onto the vertex: R lambda = -target.
  const double scale = norm(g_.v1()) * norm(g_.v2());
  if (std::abs(det_R_) > 1e-14 * scale) {
    const Vec2 corr = -target;
    const double l1 = cross(corr, g_.v2()) / det_R_;
    const double l2 = cross(g_.v1(), corr) / det_R_;
    if (l1 >= 0.0 && l2 >= 0.0) return finish(target, {}, {l1, l2}, true);
  }
  return finish(target, {}, {}, false);
}

ConstrainedStep constrain_step(const WedgeGeometry& g, const Vec2& z, const Vec2& target, Mode mode,
                               double eps_vertex) {
  const ConstrainingMap map(g, mode, eps_vertex);
  require_in_wedge(g, z, "current point");
  return map.step(z, target);
}

ConstrainedPath constrain_path(const WedgeGeometry& g, std::span<const double> times,
                               std::span<const Vec2> psi, Mode mode, double eps_vertex) {
  if (psi.empty()) throw PreconditionError("constrain_path: empty input path");
  if (times.size() != psi.size()) throw PreconditionError("constrain_path: times/psi size mismatch");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw PreconditionError("constrain_path: time grid must be strictly increasing");
    }
  }
  const ConstrainingMap map(g, mode, eps_vertex);
  require_in_wedge(g, psi[0], "initial point");

  const std::size_t n = psi.size();
  ConstrainedPath out;
  out.phi.resize(n);
  out.eta.resize(n);
  out.free_push.resize(n);
  out.phi[0] = psi[0];

  bool frozen = false;
  if (norm(psi[0]) <= eps_vertex) {
    out.t0_index = 0;
    frozen = mode == Mode::absorbed;
  }
  for (std::size_t k = 1; k < n; ++k) {
    const Vec2 target = out.phi[k - 1] + (psi[k] - psi[k - 1]);
    if (frozen) {
      out.phi[k] = {};
      out.eta[k] = out.eta[k - 1];
      out.free_push[k] = out.free_push[k - 1] - target;
      continue;
    }
    const ConstrainedStep st = map.step(out.phi[k - 1], target);
    out.phi[k] = st.z_new;
    out.eta[k] = out.eta[k - 1] + st.d_eta;
    out.free_push[k] = out.free_push[k - 1] + st.d_free;
    if (st.absorbed) {
      out.t0_index = k;
      frozen = true;
    } else if (!out.t0_index && norm(st.z_new) <= eps_vertex) {
      out.t0_index = k;
    }
  }
  if (out.t0_index) out.t0 = times[*out.t0_index];
  return out;
}

EspViolationReport check_esp(const WedgeGeometry& g, std::span<const Vec2> psi,
                             std::span<const Vec2> phi, std::span<const Vec2> eta,
                             std::span<const Vec2> free_push, const EspCheckOptions& opts) {
  const std::size_t n = psi.size();
  if (phi.size() != n || eta.size() != n || free_push.size() != n) {
    throw PreconditionError("check_esp: paths must share one grid");
  }
  EspViolationReport rep;
  std::vector<Vec2> y(n);
  std::vector<Location> loc(n);
  for (std::size_t k = 0; k < n; ++k) {
    y[k] = g.R() * eta[k] + free_push[k];
    rep.max_decomposition_error =
        std::max(rep.max_decomposition_error, norm(phi[k] - psi[k] - y[k]));
    rep.containment_violation = std::max(rep.containment_violation, g.distance_to_wedge(phi[k]));
    loc[k] = locate(g, phi[k]);
  }

  // Union of boundary cones over (s, t] takes one of four values before the
  // vertex is visited; afterwards it is the whole plane.
  const Vec2 u1 = (1.0 / norm(g.v1())) * g.v1();
  const Vec2 u2 = (1.0 / norm(g.v2())) * g.v2();
  const Cone2D both = cone_hull({g.v1(), g.v2()});
  auto dist2_ray = [](const Vec2& d, const Vec2& u) {
    if (dot(d, u) >= 0.0) {
      const double c = cross(u, d);
      return c * c;
    }
    return norm2(d);
  };
  const double tol2 = opts.tol * opts.tol;
  double max_d2 = 0.0;

  for (std::size_t s = 0; s + 1 < n; ++s) {
    bool on1 = false;
    bool on2 = false;
    const std::size_t t_end = opts.window == 0 ? n : std::min(n, s + opts.window + 1);
    for (std::size_t t = s + 1; t < t_end; ++t) {
      const Location l = loc[t];
      if (l == Location::vertex) break;
      on1 = on1 || l == Location::edge1;
      on2 = on2 || l == Location::edge2;
      const Vec2 d = y[t] - y[s];
      double d2;
      if (on1 && on2) {
        const double dist = both.distance(d);
        d2 = dist * dist;
      } else if (on1) {
        d2 = dist2_ray(d, u1);
      } else if (on2) {
        d2 = dist2_ray(d, u2);
      } else {
        d2 = norm2(d);
      }
      if (d2 > max_d2) max_d2 = d2;
      if (d2 > tol2) {
        ++rep.cone_violation_count;
        if (rep.cone_violations.size() < opts.max_reported) {
          rep.cone_violations.push_back({s, t, d, std::sqrt(d2)});
        }
      }
    }
  }
  rep.max_cone_violation = std::sqrt(max_d2);
  return rep;
}

}  // namespace rbm
