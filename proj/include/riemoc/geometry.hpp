#pragma once

#include <array>
#include <optional>
#include <vector>

#include "riemoc/expr.hpp"
#include "riemoc/grid.hpp"

namespace riemoc::geom {

/// Chart-covered Riemannian manifold: flat R^n, or the 2-D graph of a height
/// function a(x1,x2) with the metric induced from R^3. Holds the symbolic
/// partials of the height up to second order; third-order data (Christoffel
/// gradients) is produced by central finite differences with step `fd_step`.
class Manifold {
 public:
  static Manifold flat(int dim);
  static Manifold graph(const expr::Expr& height, double fd_step = 1e-5);
  static Manifold graph(const std::string& height_text, double fd_step = 1e-5);

  int dim() const { return dim_; }
  bool is_flat() const { return flat_; }
  double fd_step() const { return fd_step_; }

  struct Metric {
    Mat g, g_inv, g_sqrt;
  };
  Metric metric_at(const Vec& q) const;

  /// gamma[k](i,j) = Γ^k_{ij}; symmetric in (i,j).
  std::vector<Mat> christoffel_at(const Vec& q) const;

  /// grad[m][k](i,j) = ∂Γ^k_{ij}/∂ξ_m, by central differences of
  /// christoffel_at with step fd_step.
  std::vector<std::vector<Mat>> christoffel_grad_at(const Vec& q) const;

  /// Gauss curvature for graph manifolds; 0 on flat manifolds.
  double sectional_curvature_at(const Vec& q) const;

  /// Height value and gradient (graph manifolds only), used by reports.
  double height_at(const Vec& q) const;

 private:
  Manifold() = default;
  int dim_ = 0;
  bool flat_ = true;
  double fd_step_ = 1e-5;
  // a, a_x1, a_x2, a_x1x1, a_x1x2, a_x2x2
  std::optional<expr::Expr> height_;
  std::array<std::optional<expr::Expr>, 2> dh_;
  std::array<std::optional<expr::Expr>, 3> d2h_;
};

double norm_tangent_at(const Manifold& M, const Vec& q, const Vec& X);
double norm_cotangent_at(const Manifold& M, const Vec& q, const Vec& eta);

/// Metric pairing g(X, Y) of two tangent vectors at q.
double metric_pair_at(const Manifold& M, const Vec& q, const Vec& X, const Vec& Y);

/// Duality pairing eta(X); frame- and metric-independent.
double duality_pair(const Vec& eta, const Vec& X);

/// Curvature tensor contraction R(eta~, X, f, X), where eta~ is the dual
/// vector of the covector eta. On 2-D manifolds this is
/// -K(q) (eta(f) |X|^2 - eta(X) <f, X>); identically 0 on flat manifolds.
double curvature_term(const Manifold& M, const Vec& q, const Vec& eta, const Vec& X, const Vec& f);

/// C^1-sampled curve on a uniform grid (positions and velocities at nodes).
struct GridCurve {
  GridFn fn;  // values = positions, derivs = velocities
  Vec position(double t) const { return fn.at(t); }
  Vec velocity(double t) const { return fn.deriv_at(t); }
  std::size_t size() const { return fn.size(); }
  double dt() const { return fn.dt; }
};

enum class TransportKind { Vector, Covector };

/// Parallel transport of V0 along the sampled curve: RK4 on
/// Vdot^k + Γ^k_{ij} γdot^i V^j = 0 (covectors get the transposed,
/// sign-flipped Christoffel action). Returns the field at every node.
std::vector<Vec> parallel_transport(const Manifold& M, const GridCurve& curve, const Vec& V0,
                                    TransportKind kind);

/// Orthonormal tangent frame transported along a curve, with its dual
/// coframe. basis[k] columns are the chart components of e_i(t_k); dual[k]
/// rows are d_i(t_k). basis_dot/dual_dot hold the transport-ODE derivatives
/// for Hermite evaluation between nodes.
struct ParallelFrame {
  double t0 = 0.0, dt = 0.0;
  std::vector<Mat> basis, dual, basis_dot, dual_dot;

  Mat basis_at(double t) const;
  Mat dual_at(double t) const;
  /// Largest deviation of e_i^T G e_l from δ_il over all nodes.
  double gram_defect(const Manifold& M, const GridCurve& curve) const;
  /// Largest deviation of d_i(e_l) from δ_il over all nodes.
  double duality_defect() const;
};

ParallelFrame build_parallel_frame(const Manifold& M, const GridCurve& curve);

/// Geodesic from q with initial velocity V, integrated for time t by RK4
/// with `steps` fixed steps. Returns the endpoint; the full curve is
/// available through the overload filling a GridCurve.
Vec geodesic_shoot(const Manifold& M, const Vec& q, const Vec& V, double t, int steps = 256);
Vec geodesic_shoot(const Manifold& M, const Vec& q, const Vec& V, double t, int steps,
                   GridCurve& curve_out);

/// Inverse of geodesic_shoot(q, ., 1) by Newton iteration on the shooting
/// residual; throws NumericError when 50 iterations do not reach 1e-10.
Vec log_map(const Manifold& M, const Vec& q, const Vec& q2, int steps = 256);

/// Covariant Hessian of a scalar chart function:
/// ∇²ζ(X,Y) = (∂²ζ/∂ξ_i∂ξ_l − Γ^η_{li} ∂ζ/∂ξ_η) X_i Y_l.
double covariant_hessian_scalar(const Manifold& M, const expr::Expr& zeta, const Vec& q,
                                const Vec& X, const Vec& Y);

}  // namespace riemoc::geom
