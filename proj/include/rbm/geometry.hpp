#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "rbm/vec2.hpp"

namespace rbm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Absolute tolerance for all angular comparisons in cone predicates.
inline constexpr double kAngleTol = 1e-10;

// Tolerance used when classifying alpha against the regime boundaries 0, 1, 2.
inline constexpr double kAlphaTol = 1e-12;

enum class Regime { nonpositive, zero_to_one, one, one_to_two, at_least_two };

std::string_view to_string(Regime r);
Regime classify_alpha(double alpha);

// The wedge S = {r >= 0, 0 <= angle <= xi} with its two edges
//   dS1 = {(x, 0) : x > 0},   dS2 = {r (cos xi, sin xi) : r > 0},
// inward normals n1, n2 and oblique reflection directions v1, v2 normalized
// so that v_i . n_i = 1. Reflection angles are signed: positive tilts v_i
// toward the vertex.
class WedgeGeometry {
 public:
  double xi() const { return xi_; }
  double theta1() const { return theta1_; }
  double theta2() const { return theta2_; }
  double alpha() const { return alpha_; }
  Regime regime() const { return regime_; }

  const Vec2& n1() const { return n1_; }
  const Vec2& n2() const { return n2_; }
  // Unit tangents pointing along each edge toward the vertex.
  const Vec2& t1() const { return t1_; }
  const Vec2& t2() const { return t2_; }
  // Unit vectors pointing along each edge away from the vertex.
  const Vec2& e1() const { return e1_; }
  const Vec2& e2() const { return e2_; }
  const Vec2& v1() const { return v1_; }
  const Vec2& v2() const { return v2_; }
  // Reflection matrix: column j is v_j.
  const Mat2& R() const { return R_; }

  const Vec2& normal(int edge) const { return edge == 1 ? n1_ : n2_; }
  const Vec2& reflection(int edge) const { return edge == 1 ? v1_ : v2_; }
  const Vec2& edge_direction(int edge) const { return edge == 1 ? e1_ : e2_; }

  bool convex() const { return xi_ <= kPi; }

  // Polar-angle membership in the closed wedge; exact at the origin.
  bool contains(const Vec2& p) const;
  // Euclidean distance from p to S (0 inside).
  double distance_to_wedge(const Vec2& p) const;
  // Distance from a point to the boundary dS1 u dS2 u {0}.
  double distance_to_boundary(const Vec2& p) const;
  // Distance from p to the closed edge ray {r e_i : r >= 0}.
  double distance_to_edge(const Vec2& p, int edge) const;

  // Membership in S_delta = S + delta (cos xi/2, sin xi/2).
  bool in_inner_wedge(const Vec2& p, double delta) const;

  // Quarter plane with normal reflection, i.e. build_wedge(pi / 2, 0, 0).
  WedgeGeometry();

  friend WedgeGeometry build_wedge(double xi, double theta1, double theta2);

 private:
  struct Raw {};
  explicit WedgeGeometry(Raw) {}

  double xi_ = 0.0;
  double theta1_ = 0.0;
  double theta2_ = 0.0;
  double alpha_ = 0.0;
  Regime regime_ = Regime::zero_to_one;
  Vec2 n1_, n2_, t1_, t2_, e1_, e2_, v1_, v2_;
  Vec2 bisector_;
  Mat2 R_;
};

// Throws DomainError unless 0 < xi < 2 pi and |theta_i| < pi / 2.
WedgeGeometry build_wedge(double xi, double theta1, double theta2);

bool wedge_contains(const WedgeGeometry& g, const Vec2& p);

enum class ConeKind { zero, ray, line, wedge_sector, half_plane, full_plane };

std::string_view to_string(ConeKind k);

// Closed convex cone in the plane generated by a finite set of vectors.
// Sector-like cones are described by a counter-clockwise angular interval
// [start, start + width] with width in [0, 2 pi].
class Cone2D {
 public:
  Cone2D() = default;

  ConeKind kind() const { return kind_; }
  const std::vector<Vec2>& generators() const { return generators_; }
  // (start, end) angles in radians, start in [0, 2 pi), end = start + width.
  std::pair<double, double> angular_interval() const { return {start_, start_ + width_}; }
  double width() const { return width_; }

  // Angular membership test with kAngleTol slack. The zero vector is a
  // member of every cone.
  bool contains(const Vec2& v) const;
  // Euclidean distance from v to the cone.
  double distance(const Vec2& v) const;

  static Cone2D zero();
  static Cone2D full_plane();
  static Cone2D ray(const Vec2& direction);

  friend Cone2D cone_hull(std::span<const Vec2> vectors);

 private:
  std::vector<Vec2> generators_;
  ConeKind kind_ = ConeKind::zero;
  double start_ = 0.0;
  double width_ = 0.0;
  Vec2 first_unit_;   // unit direction at angle start
  Vec2 last_unit_;    // unit direction at angle start + width
};

// Closed convex cone of all nonnegative combinations. Zero vectors are
// ignored; an empty list gives the zero cone.
Cone2D cone_hull(std::span<const Vec2> vectors);
Cone2D cone_hull(std::initializer_list<Vec2> vectors);

// True iff co(v1, v2, mu) meets S only at the origin. Requires alpha >= 1.
bool vertex_attraction_condition(const WedgeGeometry& g, const Vec2& mu);

// Algebraic form valid for alpha > 1: R^{-1} mu has a nonnegative component.
bool vertex_attraction_algebraic(const WedgeGeometry& g, const Vec2& mu);

// The boundary cone map d(p): ray(v_i) on dS_i, the full plane at the
// vertex and {0} in the interior. Throws DomainError if p is not in S.
Cone2D boundary_cone(const WedgeGeometry& g, const Vec2& p);

// Which piece of S a point belongs to, with a relative tolerance used to
// accept points produced by the constraining map as boundary points.
enum class Location { interior, edge1, edge2, vertex };
Location locate(const WedgeGeometry& g, const Vec2& p, double rel_tol = 1e-12);

}  // namespace rbm
