#pragma once

#include <string>
#include <vector>

#include "riemoc/expr.hpp"
#include "riemoc/geometry.hpp"
#include "riemoc/grid.hpp"

namespace riemoc::dyn {

/// Control system ξdot_i = f_i(t, ξ, u) in chart coordinates, with every
/// partial derivative used by the optimality machinery generated
/// symbolically from the same f trees.
class ControlSystem {
 public:
  ControlSystem(int n, int m, const std::vector<std::string>& f_components);

  int state_dim() const { return n_; }
  int control_dim() const { return m_; }
  bool autonomous() const { return autonomous_; }

  Vec f(double t, const Vec& x, const Vec& u) const;
  Mat dfdx(double t, const Vec& x, const Vec& u) const;  // (i,l) = ∂f_i/∂ξ_l
  Mat dfdu(double t, const Vec& x, const Vec& u) const;  // (i,w) = ∂f_i/∂u_w
  Vec dfdt(double t, const Vec& x, const Vec& u) const;
  Vec d2fdtt(double t, const Vec& x, const Vec& u) const;
  Mat d2fdxdt(double t, const Vec& x, const Vec& u) const;  // (i,l) = ∂²f_i/∂ξ_l∂t
  Mat d2fdudt(double t, const Vec& x, const Vec& u) const;  // (i,w) = ∂²f_i/∂u_w∂t
  std::vector<Mat> d2fdxx(double t, const Vec& x, const Vec& u) const;  // [i](l,m)
  std::vector<Mat> d2fdxu(double t, const Vec& x, const Vec& u) const;  // [i](l,w)
  std::vector<Mat> d2fduu(double t, const Vec& x, const Vec& u) const;  // [i](v,w)

 private:
  int n_, m_;
  bool autonomous_ = true;
  std::vector<expr::Expr> f_;                  // n
  std::vector<std::vector<expr::Expr>> fx_;    // [i][l]
  std::vector<std::vector<expr::Expr>> fu_;    // [i][w]
  std::vector<expr::Expr> ft_;                 // [i]
  std::vector<expr::Expr> ftt_;                // [i]
  std::vector<std::vector<expr::Expr>> fxt_;   // [i][l]
  std::vector<std::vector<expr::Expr>> fut_;   // [i][w]
  std::vector<std::vector<std::vector<expr::Expr>>> fxx_, fxu_, fuu_;

  std::vector<double> bindings(double t, const Vec& x, const Vec& u) const;
};

/// Control (or direction) signal sampled on a uniform grid; values between
/// nodes by linear interpolation, matching how controls enter the
/// integrators.
struct Signal {
  GridFn fn;  // derivs unused

  static Signal constant(const Vec& value, double t0, double dt, std::size_t count);
  static Signal from_samples(std::vector<Vec> samples, double t0, double dt);
  /// Sample expression strings in the single variable t onto the grid.
  static Signal from_exprs(const std::vector<std::string>& exprs, double t0, double dt,
                           std::size_t count);

  Vec at(double t) const { return fn.at(t); }
  std::size_t size() const { return fn.size(); }
};

enum class Horizon { Fixed, Free };

/// State trajectory on a uniform grid with attached control samples and node
/// velocities (f at the nodes) for dense output.
struct Trajectory {
  double T = 0.0;
  int N = 0;
  Horizon horizon = Horizon::Fixed;
  GridFn states;    // values + derivs (= f at nodes)
  Signal controls;  // node samples of u

  double dt() const { return states.dt; }
  Vec state_at(double t) const { return states.at(t); }
  Vec control_at(double t) const { return controls.at(t); }
  const Vec& initial_state() const { return states.values.front(); }
  const Vec& final_state() const { return states.values.back(); }
  geom::GridCurve curve() const { return geom::GridCurve{states}; }
};

enum class FieldRole { StateVariation, Covector, SecondVariation };

/// Grid-aligned vector/covector field attached to a trajectory.
struct VariationField {
  geom::TransportKind frame_meaning = geom::TransportKind::Vector;
  FieldRole role = FieldRole::StateVariation;
  bool parallel_frame = false;  // components in a ParallelFrame instead of the chart
  GridFn fn;

  Vec at(double t) const { return fn.at(t); }
  const Vec& front() const { return fn.values.front(); }
  const Vec& back() const { return fn.values.back(); }
};

/// RK4 solution of the state equation. N must be even (Simpson reuse);
/// throws NumericError at the first non-finite node.
Trajectory integrate_state(const ControlSystem& sys, const geom::Manifold& M, const Vec& x0,
                           const Signal& u, double T, int N, Horizon horizon = Horizon::Fixed);

/// Backward RK4 for the adjoint covector: pdot = -(∂f/∂ξ)^T p from p(T) = pT.
VariationField integrate_adjoint(const ControlSystem& sys, const geom::Manifold& M,
                                 const Trajectory& traj, const Vec& pT);

/// Forward RK4 for Xdot = (∂f/∂ξ) X + (∂f/∂u) v, X(0) = X0.
VariationField integrate_first_variation(const ControlSystem& sys, const geom::Manifold& M,
                                         const Trajectory& traj, const Signal& v, const Vec& X0);

/// Free-horizon first variation:
/// Xdot = (∂f/∂ξ)X + (1/T)(∫_0^t ξ) f_t + (ξ(t)/T) f + (∂f/∂u) v,
/// with the running integral of ξ kept by the trapezoid rule on the grid.
VariationField integrate_first_variation_free_time(const ControlSystem& sys,
                                                   const geom::Manifold& M,
                                                   const Trajectory& traj, const Signal& xi,
                                                   const Signal& v, const Vec& X0);

/// Second variation in the parallel frame:
/// Ydot = F_x(t) Y + F_u(t) σ + S(t), Y(0) = dual(0)·W, where F_x, F_u and
/// the source S (carrying ½∇²_x f(X,X) + ∇_u∇_x f(X,v) + ½∇²_u f(v,v) and
/// the curvature correction) are assembled per node from the Christoffel
/// symbols and their gradients. Returns frame components.
VariationField integrate_second_variation(const ControlSystem& sys, const geom::Manifold& M,
                                          const Trajectory& traj,
                                          const geom::ParallelFrame& frame,
                                          const VariationField& X_v, const Signal& v,
                                          const Signal& sigma, const Vec& W);

/// Flow with control u + eps v + eps^2 σ from the initial point
/// exp_{x0}(eps X0 + eps^2 W); the finite-difference oracle for the
/// variational equations.
Trajectory flow_perturbed(const ControlSystem& sys, const geom::Manifold& M,
                          const Trajectory& base, double eps, const Signal& v,
                          const Signal& sigma, const Vec& X0, const Vec& W,
                          int geodesic_steps = 256);

}  // namespace riemoc::dyn
