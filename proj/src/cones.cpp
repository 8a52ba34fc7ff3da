#include "riemoc/cones.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riemoc/errors.hpp"
#include "riemoc/rng.hpp"

namespace riemoc::cones {

namespace {

Vec project_to_cone(const ConeRepr& cone, Vec v) {
  // Cyclic projections onto the halfspaces; adequate for the sampled path.
  for (int pass = 0; pass < 64; ++pass) {
    bool ok = true;
    for (Eigen::Index r = 0; r < cone.normals.rows(); ++r) {
      Vec n = cone.normals.row(r).transpose();
      double s = n.dot(v);
      if (s > 0.0) {
        v -= n * (s / n.squaredNorm());
        ok = false;
      }
    }
    if (ok) break;
  }
  return v;
}

}  // namespace

ConvexSet ConvexSet::ball(Vec center, double radius) {
  if (radius <= 0.0) throw ScenarioError("ball radius must be positive");
  ConvexSet s;
  s.kind = Kind::Ball;
  s.center = std::move(center);
  s.radius = radius;
  return s;
}

ConvexSet ConvexSet::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size() || (upper - lower).minCoeff() < 0.0)
    throw ScenarioError("box bounds inconsistent");
  ConvexSet s;
  s.kind = Kind::Box;
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  return s;
}

ConvexSet ConvexSet::polyhedron(Mat A, Vec b) {
  if (A.rows() != b.size()) throw ScenarioError("polyhedron rows mismatch");
  ConvexSet s;
  s.kind = Kind::Polyhedron;
  s.A = std::move(A);
  s.b = std::move(b);
  return s;
}

int ConvexSet::dim() const {
  switch (kind) {
    case Kind::Ball:
      return static_cast<int>(center.size());
    case Kind::Box:
      return static_cast<int>(lower.size());
    case Kind::Polyhedron:
      return static_cast<int>(A.cols());
  }
  return 0;
}

bool ConvexSet::contains(const Vec& u, double tol) const {
  switch (kind) {
    case Kind::Ball:
      return (u - center).norm() <= radius + tol;
    case Kind::Box:
      return ((u - lower).minCoeff() >= -tol) && ((upper - u).minCoeff() >= -tol);
    case Kind::Polyhedron:
      return (A * u - b).maxCoeff() <= tol;
  }
  return false;
}

double ConvexSet::distance(const Vec& u) const {
  switch (kind) {
    case Kind::Ball:
      return std::max(0.0, (u - center).norm() - radius);
    case Kind::Box: {
      double d2 = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        double e = std::max({lower[i] - u[i], u[i] - upper[i], 0.0});
        d2 += e * e;
      }
      return std::sqrt(d2);
    }
    case Kind::Polyhedron: {
      // Lower bound from the worst violated halfspace; exact when a single
      // constraint is violated.
      double worst = 0.0;
      for (Eigen::Index r = 0; r < A.rows(); ++r) {
        double viol = (A.row(r).dot(u) - b[r]) / A.row(r).norm();
        worst = std::max(worst, viol);
      }
      return worst;
    }
  }
  return 0.0;
}

bool ConeRepr::contains(const Vec& v, double tol) const {
  if (whole_space()) return true;
  return (normals * v).maxCoeff() <= tol * (1.0 + v.norm());
}

bool ShiftedConeRepr::contains(const Vec& w, double tol) const {
  if (empty) return false;
  if (normals.rows() == 0) return true;
  return (normals * w - offsets).maxCoeff() <= tol * (1.0 + w.norm());
}

ConeRepr adjacent_cone(const ConvexSet& U, const Vec& u, double tol) {
  if (!U.contains(u, tol)) throw ScenarioError("point is not in the control set");
  std::vector<Vec> rows;
  switch (U.kind) {
    case ConvexSet::Kind::Ball: {
      Vec n = u - U.center;
      if (n.norm() >= U.radius - tol) rows.push_back(n);
      break;
    }
    case ConvexSet::Kind::Box: {
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] <= U.lower[i] + tol) rows.push_back(-Vec::Unit(u.size(), i));
        if (u[i] >= U.upper[i] - tol) rows.push_back(Vec::Unit(u.size(), i));
      }
      break;
    }
    case ConvexSet::Kind::Polyhedron: {
      for (Eigen::Index r = 0; r < U.A.rows(); ++r)
        if (U.A.row(r).dot(u) >= U.b[r] - tol * (1.0 + U.A.row(r).norm()))
          rows.push_back(U.A.row(r).transpose());
      break;
    }
  }
  ConeRepr cone;
  cone.normals.resize(static_cast<Eigen::Index>(rows.size()), U.dim());
  for (std::size_t r = 0; r < rows.size(); ++r)
    cone.normals.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return cone;
}

ShiftedConeRepr second_order_set(const ConvexSet& U, const Vec& u, const Vec& v, double tol) {
  ConeRepr first = adjacent_cone(U, u, tol);
  if (!first.contains(v, tol)) throw ScenarioError("direction is outside the adjacent cone");
  std::vector<Vec> rows;
  std::vector<double> offs;
  switch (U.kind) {
    case ConvexSet::Kind::Ball: {
      Vec n = u - U.center;
      if (n.norm() >= U.radius - tol) {
        double nv = n.dot(v);
        if (std::abs(nv) <= tol * (1.0 + v.norm())) {
          rows.push_back(n);
          offs.push_back(-0.5 * v.squaredNorm());
        }
        // strictly entering direction: no second-order restriction
      }
      break;
    }
    case ConvexSet::Kind::Box: {
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u[i] <= U.lower[i] + tol && std::abs(v[i]) <= tol) {
          rows.push_back(-Vec::Unit(u.size(), i));
          offs.push_back(0.0);
        }
        if (u[i] >= U.upper[i] - tol && std::abs(v[i]) <= tol) {
          rows.push_back(Vec::Unit(u.size(), i));
          offs.push_back(0.0);
        }
      }
      break;
    }
    case ConvexSet::Kind::Polyhedron: {
      for (Eigen::Index r = 0; r < U.A.rows(); ++r) {
        double scale = 1.0 + U.A.row(r).norm();
        bool active = U.A.row(r).dot(u) >= U.b[r] - tol * scale;
        if (active && std::abs(U.A.row(r).dot(v)) <= tol * scale) {
          rows.push_back(U.A.row(r).transpose());
          offs.push_back(0.0);
        }
      }
      break;
    }
  }
  ShiftedConeRepr s;
  s.normals.resize(static_cast<Eigen::Index>(rows.size()), U.dim());
  s.offsets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s.normals.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    s.offsets[static_cast<Eigen::Index>(r)] = offs[r];
  }
  return s;
}

SupportResult support_over_cone(const ConeRepr& cone, const Vec& c) {
  SupportResult res;
  Eigen::Index k = cone.normals.rows();
  if (c.norm() == 0.0) return res;
  if (k == 0) {
    res.value = c.norm();
    return res;
  }
  if (k == 1) {
    Vec n = cone.normals.row(0).transpose();
    if (c.dot(n) <= 0.0) {
      res.value = c.norm();
    } else {
      Vec proj = c - n * (c.dot(n) / n.squaredNorm());
      res.value = proj.norm();
    }
    return res;
  }
  if (k == 2) {
    // Exact by KKT case analysis: best feasible point among c itself, its
    // projection onto either active hyperplane, and the projection onto the
    // intersection subspace.
    Vec n1 = cone.normals.row(0).transpose();
    Vec n2 = cone.normals.row(1).transpose();
    double best = 0.0;
    auto consider = [&](const Vec& cand) {
      if (cand.norm() == 0.0) return;
      if (cone.contains(cand, 1e-12)) best = std::max(best, cand.norm());
    };
    consider(c);
    consider(c - n1 * (c.dot(n1) / n1.squaredNorm()));
    consider(c - n2 * (c.dot(n2) / n2.squaredNorm()));
    // Projection onto {n1·v = 0, n2·v = 0}
    Mat N(2, c.size());
    N.row(0) = n1.transpose();
    N.row(1) = n2.transpose();
    Mat NNt = N * N.transpose();
    Eigen::FullPivLU<Mat> lu(NNt);
    if (lu.isInvertible()) {
      Vec proj = c - N.transpose() * lu.solve(N * c);
      best = std::max(best, proj.norm());
    }
    res.value = best;
    return res;
  }
  // Sampled fallback: deterministic sphere sampling projected onto the cone,
  // then a short polish around the incumbent.
  res.sampled = true;
  DetRng rng(0x5eedULL);
  Eigen::Index m = c.size();
  double best = 0.0;
  Vec best_v = Vec::Zero(m);
  for (int s = 0; s < 4096; ++s) {
    Vec d(m);
    for (Eigen::Index i = 0; i < m; ++i) d[i] = rng.normal();
    d = project_to_cone(cone, d);
    double nd = d.norm();
    if (nd == 0.0) continue;
    d /= nd;
    double val = c.dot(d);
    if (val > best) {
      best = val;
      best_v = d;
    }
  }
  double step = 0.25;
  for (int it = 0; it < 200; ++it) {
    Vec cand = project_to_cone(cone, best_v + step * c / c.norm());
    double nc = cand.norm();
    if (nc > 0.0) {
      cand /= nc;
      double val = c.dot(cand);
      if (val > best) {
        best = val;
        best_v = cand;
        continue;
      }
    }
    step *= 0.7;
  }
  res.value = std::max(best, 0.0);
  return res;
}

AffineSupResult sup_affine_over_shifted(const ShiftedConeRepr& S, const Vec& c, double c0) {
  if (S.empty) throw ScenarioError("sup over an empty second-order set");
  AffineSupResult res;
  Eigen::Index k = S.normals.rows();
  double cn = c.norm();
  // Coefficients at roundoff scale count as zero; otherwise any nonzero c
  // over an unbounded direction flags +inf.
  if (cn <= 1e-11) {
    res.value = c0;
    return res;
  }
  if (k == 0) {
    res.unbounded = true;
    return res;
  }
  if (k == 1) {
    Vec n = S.normals.row(0).transpose();
    double lambda = c.dot(n) / n.squaredNorm();
    if (lambda >= -1e-12 && (c - lambda * n).norm() <= 1e-9 * (1.0 + cn)) {
      res.value = c0 + std::max(lambda, 0.0) * S.offsets[0];
    } else {
      res.unbounded = true;
    }
    return res;
  }
  // LP duality: sup{c·w : Nw <= beta} = min{beta·y : N^T y = c, y >= 0}
  // when the dual is feasible, else +inf. Enumerate dual basic solutions;
  // dimensions here are desk scale.
  Eigen::Index m = c.size();
  double best = std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::vector<Eigen::Index> subset;
  auto try_subset = [&](const std::vector<Eigen::Index>& rows) {
    Mat Nt(m, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      Nt.col(static_cast<Eigen::Index>(i)) = S.normals.row(rows[i]).transpose();
    Vec y = Nt.colPivHouseholderQr().solve(c);
    if ((Nt * y - c).norm() > 1e-9 * (1.0 + cn)) return;
    if (y.minCoeff() < -1e-9) return;
    double val = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      val += std::max(y[static_cast<Eigen::Index>(i)], 0.0) * S.offsets[rows[i]];
    feasible = true;
    best = std::min(best, val);
  };
  // All subsets of rows of size <= m.
  std::vector<Eigen::Index> stack;
  auto recurse = [&](auto&& self, Eigen::Index start) -> void {
    if (!stack.empty()) try_subset(stack);
    if (static_cast<Eigen::Index>(stack.size()) == std::min(m, k)) return;
    for (Eigen::Index r = start; r < k; ++r) {
      stack.push_back(r);
      self(self, r + 1);
      stack.pop_back();
    }
  };
  recurse(recurse, 0);
  if (!feasible) {
    res.unbounded = true;
    return res;
  }
  res.value = c0 + best;
  return res;
}

}  // namespace riemoc::cones
