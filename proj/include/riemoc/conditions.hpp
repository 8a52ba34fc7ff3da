#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riemoc/cones.hpp"
#include "riemoc/dynamics.hpp"
#include "riemoc/expr.hpp"
#include "riemoc/geometry.hpp"

namespace riemoc::cond {

/// Endpoint maps φ0 (objectives), φ (inequalities), ψ (equalities) as
/// expressions over a1..an (initial chart coordinates), b1..bn (terminal)
/// and T, with all first and second partials generated from the same trees.
class EndpointData {
 public:
  EndpointData(int n, const std::vector<std::string>& phi0, const std::vector<std::string>& phi,
               const std::vector<std::string>& psi);

  int r() const { return r_; }
  int j() const { return j_; }
  int k() const { return k_; }
  int n() const { return n_; }
  int total() const { return r_ + j_ + k_; }

  bool is_objective(int comp) const { return comp < r_; }
  bool is_inequality(int comp) const { return comp >= r_ && comp < r_ + j_; }
  bool is_equality(int comp) const { return comp >= r_ + j_; }

  /// All component values stacked (φ0, φ, ψ).
  Vec values(const Vec& q0, const Vec& qT, double T) const;
  double value(int comp, const Vec& q0, const Vec& qT, double T) const;

  /// Differentials with respect to the initial / terminal chart point.
  Vec d1(int comp, const Vec& q0, const Vec& qT, double T) const;
  Vec d2(int comp, const Vec& q0, const Vec& qT, double T) const;

  /// D²ζ(X) = ∇₁²ζ(X0,X0) + 2∇₂∇₁ζ(X0,XT) + ∇₂²ζ(XT,XT); the pure blocks
  /// carry the Christoffel correction of the covariant Hessian, the mixed
  /// block is the plain mixed partial.
  double d2_quadratic(const geom::Manifold& M, int comp, const Vec& q0, const Vec& qT, double T,
                      const Vec& X0, const Vec& XT) const;

 private:
  int n_, r_, j_, k_;
  std::vector<expr::Expr> comp_;
  std::vector<std::vector<expr::Expr>> da_, db_;            // [comp][i]
  std::vector<std::vector<std::vector<expr::Expr>>> daa_, dab_, dbb_;
  std::vector<double> bindings(const Vec& q0, const Vec& qT, double T) const;
};

/// Hamiltonian H = p(f) and its derivative bundle at one (t, ξ, p, u).
/// hess_x carries the Christoffel correction H_il = ∂²H − Γ^η_{li} ∂_η H.
struct HamiltonianDerivs {
  double H = 0.0;
  Vec dHdx, dHdu;
  Mat hess_x;    // n×n, symmetric
  Mat d2Hdu2;    // m×m
  Mat d2Hdxdu;   // n×m
  double dHdt = 0.0, d2Hdt2 = 0.0;
  Vec d2Hdxdt;   // n
  Vec d2Hdudt;   // m
};

HamiltonianDerivs hamiltonian_derivs(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                     double t, const Vec& q, const Vec& p, const Vec& u);

/// Lagrangian L_ℓ = (φ0ᵀ, φᵀ, ψᵀ) ℓ values and endpoint differentials.
struct LagrangianBundle {
  double L = 0.0;
  Vec d1, d2;
};

LagrangianBundle lagrangian_derivs(const EndpointData& ep, const Vec& ell, const Vec& q0,
                                   const Vec& qT, double T);

double lagrangian_d2_quadratic(const EndpointData& ep, const geom::Manifold& M, const Vec& ell,
                               const Vec& q0, const Vec& qT, double T, const Vec& X0,
                               const Vec& XT);

struct Tolerances {
  double active = 1e-8;        // |φ_i| threshold for I_A
  double ia_prime = 1e-7;      // first-order endpoint term threshold for I_A'
  double first_order = 1e-7;   // max ∇_u H support violation
  double singular = 1e-7;      // singular-direction endpoint residuals
  double margin = 1e-6;        // certification margin
  double family_defect = 1e-7; // |A ℓ| on family members
  double admissible = 1e-7;    // endpoint residuals of the candidate
  double cone = 1e-9;          // control-set membership
};

/// Polyhedral cone of Lagrange multipliers {ℓ ≠ 0 : Aℓ = 0, sign pattern},
/// where A stacks the transversality defects p_e(0) + d₁L_e of the basis
/// adjoint solutions.
struct MultiplierFamily {
  Mat A;  // n × (r+j+k)
  std::vector<int> active_set;        // I_A (component indices)
  std::vector<int> sign_constrained;  // ℓ_i <= 0
  std::vector<int> pinned_zero;       // ℓ_i = 0
  Mat nullspace;                      // (r+j+k) × q
  std::vector<Vec> rays;              // |ℓ|_1 = 1
  std::vector<Vec> lineality;
  bool sampled_only = false;  // dimension exceeded exact ray enumeration
  double max_ray_defect = 0.0;

  bool empty() const { return rays.empty() && lineality.empty() && !sampled_only; }
  bool member(const Vec& ell, double tol = 1e-7) const;
  std::vector<Vec> sample_cross_section(int count, std::uint64_t seed) const;
};

MultiplierFamily solve_multiplier_cone(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                       const dyn::Trajectory& traj, const EndpointData& ep,
                                       const Tolerances& tol = {},
                                       const std::vector<int>* ia_prime = nullptr);

/// Pointwise first-order check: per node, sup of ∇_u H over the adjacent
/// cone intersected with the unit ball; the condition holds when the largest
/// support value stays below tol.first_order.
struct FirstOrderProfile {
  std::vector<double> sup_per_node;
  double max_violation = 0.0;
  bool holds = false;
  bool sampled_support = false;
};

FirstOrderProfile check_first_order(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                    const dyn::Trajectory& traj, const EndpointData& ep,
                                    const Vec& ell, const cones::ConvexSet& U,
                                    const Tolerances& tol = {});

/// Singular-direction verification: cone membership of v, the variational
/// field X, the endpoint inequality/equality residuals, the refined active
/// set I_A', the per-ray degeneracy |∇_u H · v|, and a sampled check of the
/// d_U(ū + εv) = O(ε²) hypothesis.
struct SingularCheck {
  dyn::VariationField X;
  bool cone_ok = false;
  double max_inequality_violation = 0.0;  // over I_A components
  double max_equality_residual = 0.0;     // over ψ components
  bool endpoint_ok = false;
  std::vector<int> ia;        // I_A
  std::vector<int> ia_prime;  // I_A'
  Vec endpoint_terms;         // first-order endpoint term per component
  std::vector<double> degeneracy_per_ray;
  double max_degeneracy = 0.0;
  double du_ratio = 0.0;  // max over sampled ε of dist(ū+εv, U)/ε²
  bool ok() const { return cone_ok && endpoint_ok; }
};

SingularCheck verify_singular_direction(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                        const dyn::Trajectory& traj, const dyn::Signal& v,
                                        const dyn::Signal* xi, const EndpointData& ep,
                                        const cones::ConvexSet& U, const Vec& X0,
                                        const MultiplierFamily* family = nullptr,
                                        const Tolerances& tol = {});

/// Term-by-term value of the second-order inequality left-hand side.
struct SecondOrderBreakdown {
  double term_sigma = 0.0;      // ∫ 2∇_u H(σ)
  double term_hess_x = 0.0;     // ∫ ∇²_x H(X,X)
  double term_mixed_xu = 0.0;   // ∫ 2∇_u∇_x H(X,v)
  double term_uu = 0.0;         // ∫ ∇²_u H(v,v)
  double term_curvature = 0.0;  // ∫ -R(p~,X,f,X)
  double term_d2l = 0.0;        // D²L_ℓ(X)
  // Free-time extras; all zero for fixed-horizon evaluation.
  double ft_tt = 0.0, ft_xt = 0.0, ft_txi = 0.0, ft_ut = 0.0, ft_xix = 0.0, ft_xiu = 0.0;
  double total = 0.0;
};

SecondOrderBreakdown second_order_lhs(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                      const dyn::Trajectory& traj, const EndpointData& ep,
                                      const Vec& ell, const dyn::Signal& v,
                                      const dyn::VariationField& X, const dyn::Signal& sigma);

/// Per-node values of each integrand term (plus the adjoint field and the
/// ∇_u H samples); second_order_lhs is their Simpson sum, and reports emit
/// them as time series.
struct SecondOrderNodeTerms {
  std::vector<double> sigma, hess, mixed, uu, curv;
  std::vector<Vec> dHdu;
  dyn::VariationField p;
};

SecondOrderNodeTerms second_order_node_terms(const dyn::ControlSystem& sys,
                                             const geom::Manifold& M,
                                             const dyn::Trajectory& traj,
                                             const EndpointData& ep, const Vec& ell,
                                             const dyn::Signal& v,
                                             const dyn::VariationField& X,
                                             const dyn::Signal& sigma);

/// Supremum of the second-order left-hand side over all σ with
/// σ(t_k) in the given shifted cone at every node (Simpson-weighted,
/// nodewise).
struct SupResult {
  double value = 0.0;
  bool unbounded = false;
};

SupResult second_order_sup(const dyn::ControlSystem& sys, const geom::Manifold& M,
                           const dyn::Trajectory& traj, const EndpointData& ep, const Vec& ell,
                           const dyn::Signal& v, const dyn::VariationField& X,
                           const std::vector<cones::ShiftedConeRepr>& sigma_sets);

enum class Verdict { CertifiedNotWeakPareto, Inconclusive, InfeasibleFirstOrder,
                     AdmissibilityFailed };

std::string verdict_name(Verdict v);

struct RayEvaluation {
  Vec ell;
  SupResult sup;
  double first_order_violation = 0.0;
  SecondOrderBreakdown breakdown;  // at the scenario σ
};

struct CertifyOptions {
  Tolerances tol;
  int samples = 10000;
  std::uint64_t seed = 1;
};

struct CertifyResult {
  Verdict verdict = Verdict::Inconclusive;
  double margin = 0.0;            // min over sampled multipliers of the sup
  bool margin_unbounded = false;  // every sampled sup was +inf
  Vec minimizing_ell;
  std::vector<RayEvaluation> ray_table;
  MultiplierFamily family;
  SingularCheck singular;
  std::string note;
};

/// Contrapositive certificate: every multiplier in the (I_A'-restricted)
/// family violates the second-order inequality by at least the margin.
CertifyResult certify_not_weak_pareto(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                      const dyn::Trajectory& traj, const EndpointData& ep,
                                      const cones::ConvexSet& U, const dyn::Signal& v,
                                      const dyn::Signal* xi, const Vec& X0,
                                      const dyn::Signal& sigma, const CertifyOptions& opts = {});

/// Unit-interval reparameterization ȳ(s) = x̄(T̄ s), w̄(s) = ū(T̄ s) with
/// constant time-dilation control v̄ ≡ T̄.
struct UnitReparam {
  dyn::Trajectory unit;
  double Tbar = 0.0;
};

UnitReparam reparameterize_to_unit(const dyn::Trajectory& traj);
dyn::Trajectory reparameterize_back(const UnitReparam& rep);

/// Free-horizon first-order residual profile
/// max_t |H(t) + ∫_t^T ∂H/∂t dμ| with the tail integral accumulated by
/// per-interval Simpson from the right.
struct FreeTimeResidual {
  std::vector<double> profile;
  double max_residual = 0.0;
};

FreeTimeResidual free_time_first_order_residual(const dyn::ControlSystem& sys,
                                                const geom::Manifold& M,
                                                const dyn::Trajectory& traj,
                                                const EndpointData& ep, const Vec& ell);

SecondOrderBreakdown free_time_second_order_lhs(const dyn::ControlSystem& sys,
                                                const geom::Manifold& M,
                                                const dyn::Trajectory& traj,
                                                const EndpointData& ep, const Vec& ell,
                                                const dyn::Signal& xi, const dyn::Signal& v,
                                                const dyn::VariationField& X,
                                                const dyn::Signal& sigma);

}  // namespace riemoc::cond
