#include "rbm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "rbm/errors.hpp"

namespace rbm {

namespace {

double angle_of(const Vec2& v) {
  double a = std::atan2(v.y, v.x);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

// Counter-clockwise angular offset of `a` from `from`, in [0, 2 pi).
double ccw_offset(double from, double a) {
  double d = std::fmod(a - from, kTwoPi);
  if (d < 0.0) d += kTwoPi;
  return d;
}

Vec2 unit(const Vec2& v) {
  const double n = norm(v);
  return {v.x / n, v.y / n};
}

double distance_to_ray(const Vec2& p, const Vec2& unit_dir) {
  if (dot(p, unit_dir) >= 0.0) return std::abs(cross(unit_dir, p));
  return norm(p);
}

}  // namespace

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::nonpositive: return "nonpositive";
    case Regime::zero_to_one: return "zero_to_one";
    case Regime::one: return "one";
    case Regime::one_to_two: return "one_to_two";
    case Regime::at_least_two: return "at_least_two";
  }
  return "unknown";
}

Regime classify_alpha(double alpha) {
  if (alpha <= kAlphaTol) return Regime::nonpositive;
  if (std::abs(alpha - 1.0) <= kAlphaTol) return Regime::one;
  if (alpha < 1.0) return Regime::zero_to_one;
  if (alpha < 2.0 - kAlphaTol) return Regime::one_to_two;
  return Regime::at_least_two;
}

namespace {

// cos and sin with exact values at quarter turns, so that edges along the
// axes are represented exactly.
std::pair<double, double> exact_cos_sin(double a) {
  if (a == kPi / 2) return {0.0, 1.0};
  if (a == kPi) return {-1.0, 0.0};
  if (a == 3 * kPi / 2) return {0.0, -1.0};
  return {std::cos(a), std::sin(a)};
}

}  // namespace

WedgeGeometry build_wedge(double xi, double theta1, double theta2) {
  if (!(xi > 0.0 && xi < kTwoPi)) {
    std::ostringstream msg;
    msg << "wedge angle xi = " << xi << " must lie in (0, 2 pi)";
    throw DomainError(msg.str());
  }
  for (double th : {theta1, theta2}) {
    if (!(std::abs(th) < kPi / 2)) {
      std::ostringstream msg;
      msg << "reflection angle " << th << " must lie in (-pi/2, pi/2)";
      throw DomainError(msg.str());
    }
  }

  WedgeGeometry g{WedgeGeometry::Raw{}};
  g.xi_ = xi;
  g.theta1_ = theta1;
  g.theta2_ = theta2;
  g.alpha_ = (theta1 + theta2) / xi;
  g.regime_ = classify_alpha(g.alpha_);

  const auto [c, s] = exact_cos_sin(xi);
  g.n1_ = {0.0, 1.0};
  g.n2_ = {s, -c};
  g.e1_ = {1.0, 0.0};
  g.e2_ = {c, s};
  g.t1_ = -g.e1_;
  g.t2_ = -g.e2_;
  g.v1_ = g.n1_ + std::tan(theta1) * g.t1_;
  g.v2_ = g.n2_ + std::tan(theta2) * g.t2_;
  g.R_ = Mat2{g.v1_, g.v2_};
  const auto [bc, bs] = exact_cos_sin(xi / 2);
  g.bisector_ = {bc, bs};
  return g;
}

WedgeGeometry::WedgeGeometry() : WedgeGeometry(build_wedge(kPi / 2, 0.0, 0.0)) {}

bool WedgeGeometry::contains(const Vec2& p) const {
  if (p.x == 0.0 && p.y == 0.0) return true;
  const bool upper = p.y > 0.0 || (p.y == 0.0 && p.x > 0.0);  // angle in [0, pi)
  if (upper) {
    if (xi_ >= kPi) return true;
    return dot(n2_, p) >= 0.0;
  }
  if (xi_ < kPi) return false;
  return dot(n2_, p) >= 0.0;
}

double WedgeGeometry::distance_to_edge(const Vec2& p, int edge) const {
  return distance_to_ray(p, edge_direction(edge));
}

double WedgeGeometry::distance_to_wedge(const Vec2& p) const {
  if (contains(p)) return 0.0;
  return std::min(distance_to_edge(p, 1), distance_to_edge(p, 2));
}

double WedgeGeometry::distance_to_boundary(const Vec2& p) const {
  return std::min(distance_to_edge(p, 1), distance_to_edge(p, 2));
}

bool WedgeGeometry::in_inner_wedge(const Vec2& p, double delta) const {
  return contains(p - delta * bisector_);
}

bool wedge_contains(const WedgeGeometry& g, const Vec2& p) { return g.contains(p); }

std::string_view to_string(ConeKind k) {
  switch (k) {
    case ConeKind::zero: return "zero";
    case ConeKind::ray: return "ray";
    case ConeKind::line: return "line";
    case ConeKind::wedge_sector: return "wedge_sector";
    case ConeKind::half_plane: return "half_plane";
    case ConeKind::full_plane: return "full_plane";
  }
  return "unknown";
}

Cone2D Cone2D::zero() { return Cone2D{}; }

Cone2D Cone2D::full_plane() {
  Cone2D c;
  c.kind_ = ConeKind::full_plane;
  c.width_ = kTwoPi;
  return c;
}

Cone2D Cone2D::ray(const Vec2& direction) {
  const Vec2 g[] = {direction};
  return cone_hull(g);
}

Cone2D cone_hull(std::initializer_list<Vec2> vectors) {
  return cone_hull(std::span<const Vec2>(vectors.begin(), vectors.size()));
}

Cone2D cone_hull(std::span<const Vec2> vectors) {
  Cone2D cone;
  struct Dir {
    double angle;
    Vec2 unit;
  };
  std::vector<Dir> dirs;
  for (const Vec2& v : vectors) {
    if (v.x == 0.0 && v.y == 0.0) continue;
    cone.generators_.push_back(v);
    dirs.push_back({angle_of(v), unit(v)});
  }
  if (dirs.empty()) return cone;

  std::sort(dirs.begin(), dirs.end(), [](const Dir& a, const Dir& b) { return a.angle < b.angle; });

  // The largest circular gap between consecutive generator angles is the
  // complement of the cone's angular extent.
  std::size_t gap_after = dirs.size() - 1;
  double max_gap = dirs.front().angle + kTwoPi - dirs.back().angle;
  for (std::size_t i = 0; i + 1 < dirs.size(); ++i) {
    const double gap = dirs[i + 1].angle - dirs[i].angle;
    if (gap > max_gap) {
      max_gap = gap;
      gap_after = i;
    }
  }
  const Dir& first = dirs[(gap_after + 1) % dirs.size()];
  const Dir& last = dirs[gap_after];
  const double width = kTwoPi - max_gap;

  cone.start_ = first.angle;
  cone.first_unit_ = first.unit;
  cone.last_unit_ = last.unit;

  if (width <= kAngleTol) {
    cone.kind_ = ConeKind::ray;
    cone.width_ = 0.0;
    cone.last_unit_ = first.unit;
  } else if (max_gap > kPi + kAngleTol) {
    cone.kind_ = ConeKind::wedge_sector;
    cone.width_ = width;
  } else if (max_gap >= kPi - kAngleTol) {
    cone.width_ = kPi;
    const bool only_two_directions = std::all_of(dirs.begin(), dirs.end(), [&](const Dir& d) {
      const double off = ccw_offset(first.angle, d.angle);
      return off <= kAngleTol || off >= kTwoPi - kAngleTol || std::abs(off - kPi) <= kAngleTol;
    });
    cone.kind_ = only_two_directions ? ConeKind::line : ConeKind::half_plane;
  } else {
    cone.kind_ = ConeKind::full_plane;
    cone.start_ = 0.0;
    cone.width_ = kTwoPi;
  }
  return cone;
}

bool Cone2D::contains(const Vec2& v) const {
  if (v.x == 0.0 && v.y == 0.0) return true;
  switch (kind_) {
    case ConeKind::zero: return false;
    case ConeKind::full_plane: return true;
    default: break;
  }
  const double off = ccw_offset(start_, angle_of(v));
  const bool near_start = off <= kAngleTol || off >= kTwoPi - kAngleTol;
  switch (kind_) {
    case ConeKind::ray: return near_start;
    case ConeKind::line: return near_start || std::abs(off - kPi) <= kAngleTol;
    default: return near_start || off <= width_ + kAngleTol;
  }
}

double Cone2D::distance(const Vec2& v) const {
  switch (kind_) {
    case ConeKind::zero: return norm(v);
    case ConeKind::full_plane: return 0.0;
    case ConeKind::ray: return distance_to_ray(v, first_unit_);
    case ConeKind::line: return std::abs(cross(first_unit_, v));
    default: break;
  }
  if (v.x == 0.0 && v.y == 0.0) return 0.0;
  if (ccw_offset(start_, angle_of(v)) <= width_) return 0.0;
  return std::min(distance_to_ray(v, first_unit_), distance_to_ray(v, last_unit_));
}

bool vertex_attraction_condition(const WedgeGeometry& g, const Vec2& mu) {
  if (g.alpha() < 1.0 - kAlphaTol) {
    std::ostringstream msg;
    msg << "vertex attraction condition is only defined for alpha >= 1 (alpha = " << g.alpha()
        << ")";
    throw PreconditionError(msg.str());
  }
  const Cone2D k = cone_hull({g.v1(), g.v2(), mu});
  // Does some nonzero direction of k lie in the closed sector [0, xi]?
  auto in_wedge_angle = [&](double a) {
    return ccw_offset(0.0, a) <= g.xi() + kAngleTol || ccw_offset(0.0, a) >= kTwoPi - kAngleTol;
  };
  switch (k.kind()) {
    case ConeKind::zero: return true;
    case ConeKind::full_plane: return false;
    case ConeKind::ray: return !in_wedge_angle(k.angular_interval().first);
    case ConeKind::line: {
      const double a = k.angular_interval().first;
      return !in_wedge_angle(a) && !in_wedge_angle(a + kPi);
    }
    default: {
      const auto [start, end] = k.angular_interval();
      // Two closed arcs meet iff one contains the other's starting point.
      const bool cone_start_in_s = in_wedge_angle(start);
      const bool s_start_in_cone = ccw_offset(start, 0.0) <= k.width() + kAngleTol ||
                                   ccw_offset(start, 0.0) >= kTwoPi - kAngleTol;
      (void)end;
      return !(cone_start_in_s || s_start_in_cone);
    }
  }
}

bool vertex_attraction_algebraic(const WedgeGeometry& g, const Vec2& mu) {
  const Mat2& R = g.R();
  const double det = R.det();
  if (det == 0.0) throw PreconditionError("reflection matrix is singular (alpha = 1)");
  // Cramer's rule for R lambda = mu.
  const double l1 = cross(mu, R.col1) / det;
  const double l2 = cross(R.col0, mu) / det;
  return l1 >= 0.0 || l2 >= 0.0;
}

Location locate(const WedgeGeometry& g, const Vec2& p, double rel_tol) {
  if (p.x == 0.0 && p.y == 0.0) return Location::vertex;
  const double tol = rel_tol * std::max(1.0, norm(p));
  if (std::abs(p.y) <= tol && p.x > 0.0) return Location::edge1;
  if (std::abs(dot(g.n2(), p)) <= tol && dot(g.e2(), p) > 0.0) return Location::edge2;
  return Location::interior;
}

Cone2D boundary_cone(const WedgeGeometry& g, const Vec2& p) {
  if (g.distance_to_wedge(p) > 1e-12 * std::max(1.0, norm(p))) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ") is not in the wedge";
    throw DomainError(msg.str());
  }
  switch (locate(g, p)) {
    case Location::vertex: return Cone2D::full_plane();
    case Location::edge1: return Cone2D::ray(g.v1());
    case Location::edge2: return Cone2D::ray(g.v2());
    case Location::interior: return Cone2D::zero();
  }
  return Cone2D::zero();
}

}  // namespace rbm
