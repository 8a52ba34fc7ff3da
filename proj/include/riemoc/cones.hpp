#pragma once

#include <vector>

#include "riemoc/grid.hpp"

namespace riemoc::cones {

/// Closed convex control set: a Euclidean ball, an axis-aligned box, or a
/// polyhedron {u : A u <= b}.
struct ConvexSet {
  enum class Kind { Ball, Box, Polyhedron };
  Kind kind = Kind::Ball;
  Vec center;      // Ball
  double radius = 0.0;
  Vec lower, upper;  // Box
  Mat A;             // Polyhedron
  Vec b;

  static ConvexSet ball(Vec center, double radius);
  static ConvexSet box(Vec lower, Vec upper);
  static ConvexSet polyhedron(Mat A, Vec b);

  int dim() const;
  bool contains(const Vec& u, double tol = 1e-9) const;
  /// Euclidean distance to the set; exact for balls and boxes. Used by the
  /// definition-level cone oracles.
  double distance(const Vec& u) const;
};

/// Closed convex cone {v : n_k · v <= 0 for all k}; no halfspaces means the
/// whole space.
struct ConeRepr {
  Mat normals;  // one halfspace normal per row; 0 rows = whole space

  bool whole_space() const { return normals.rows() == 0; }
  bool contains(const Vec& v, double tol = 1e-9) const;
};

/// Shifted halfspace intersection {w : n_k · w <= beta_k}, or explicitly
/// empty.
struct ShiftedConeRepr {
  Mat normals;
  Vec offsets;
  bool empty = false;

  bool whole_space() const { return !empty && normals.rows() == 0; }
  bool contains(const Vec& w, double tol = 1e-9) const;
};

/// Adjacent cone T_U^b(u) of the convex set U at u in U: the whole space at
/// interior points, active-constraint halfspaces on the boundary.
/// Throws ScenarioError if u is not in U (tolerance tol).
ConeRepr adjacent_cone(const ConvexSet& U, const Vec& u, double tol = 1e-9);

/// Second-order adjacent subset T_U^b(2)(u, v) for v in the adjacent cone.
/// Ball with boundary normal n = u - c: strictly entering v gives the whole
/// space; grazing v (n·v = 0) gives {w : n·w <= -|v|^2/2}. Box/polyhedron
/// faces: active with n·v = 0 contribute n·w <= 0, active with n·v < 0 are
/// free.
ShiftedConeRepr second_order_set(const ConvexSet& U, const Vec& u, const Vec& v,
                                 double tol = 1e-9);

struct SupportResult {
  double value = 0.0;
  bool sampled = false;  // true when the >2-halfspace sampling path was used
};

/// sup { c·v : v in cone, |v| <= 1 }. Exact for 0, 1, or 2 halfspaces;
/// projected sampling with local polish otherwise (tagged `sampled`).
SupportResult support_over_cone(const ConeRepr& cone, const Vec& c);

struct AffineSupResult {
  double value = 0.0;
  bool unbounded = false;
};

/// sup { c0 + c·w : w in S } for a shifted halfspace intersection S.
/// Single halfspace {n·w <= beta}: finite iff c = lambda n with lambda >= 0,
/// value c0 + lambda beta. Multiple halfspaces: dual basis enumeration of
/// min { beta^T y : N^T y = c, y >= 0 }.
AffineSupResult sup_affine_over_shifted(const ShiftedConeRepr& S, const Vec& c, double c0);

}  // namespace riemoc::cones
