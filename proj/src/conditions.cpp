#include "riemoc/conditions.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "riemoc/double_description.hpp"
#include "riemoc/rng.hpp"

namespace riemoc::cond {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> endpoint_vars(int n) {
  std::vector<std::string> vars;
  vars.reserve(static_cast<std::size_t>(2 * n + 1));
  for (int i = 1; i <= n; ++i) vars.push_back("a" + std::to_string(i));
  for (int i = 1; i <= n; ++i) vars.push_back("b" + std::to_string(i));
  vars.emplace_back("T");
  return vars;
}

}  // namespace

SecondOrderNodeTerms second_order_node_terms(const dyn::ControlSystem& sys,
                                             const geom::Manifold& M,
                                             const dyn::Trajectory& traj,
                                             const EndpointData& ep, const Vec& ell,
                                             const dyn::Signal& v,
                                             const dyn::VariationField& X,
                                             const dyn::Signal& sigma) {
  std::size_t count = traj.states.size();
  SecondOrderNodeTerms out;
  out.sigma.resize(count);
  out.hess.resize(count);
  out.mixed.resize(count);
  out.uu.resize(count);
  out.curv.resize(count);
  out.dHdu.resize(count);
  Vec pT = lagrangian_derivs(ep, ell, traj.initial_state(), traj.final_state(), traj.T).d2;
  out.p = dyn::integrate_adjoint(sys, M, traj, pT);
  for (std::size_t k = 0; k < count; ++k) {
    double t = traj.states.time_at(k);
    const Vec& x = traj.states.values[k];
    Vec u = traj.controls.at(t);
    const Vec& pk = out.p.fn.values[k];
    Vec vk = v.at(t);
    Vec sk = sigma.at(t);
    Vec Xk = X.fn.values[k];
    auto Hd = hamiltonian_derivs(sys, M, t, x, pk, u);
    out.dHdu[k] = Hd.dHdu;
    out.sigma[k] = 2.0 * Hd.dHdu.dot(sk);
    out.hess[k] = Xk.dot(Hd.hess_x * Xk);
    out.mixed[k] = 2.0 * Xk.dot(Hd.d2Hdxdu * vk);
    out.uu[k] = vk.dot(Hd.d2Hdu2 * vk);
    out.curv[k] = -geom::curvature_term(M, x, pk, Xk, traj.states.derivs[k]);
  }
  return out;
}

namespace {

std::vector<int> compute_active_set(const EndpointData& ep, const dyn::Trajectory& traj,
                                    double active_tol) {
  Vec vals = ep.values(traj.initial_state(), traj.final_state(), traj.T);
  std::vector<int> ia;
  for (int c = 0; c < ep.total(); ++c) {
    if (ep.is_objective(c)) ia.push_back(c);
    else if (ep.is_inequality(c) && std::abs(vals[c]) <= active_tol) ia.push_back(c);
  }
  return ia;
}

}  // namespace

EndpointData::EndpointData(int n, const std::vector<std::string>& phi0,
                           const std::vector<std::string>& phi,
                           const std::vector<std::string>& psi)
    : n_(n), r_(static_cast<int>(phi0.size())), j_(static_cast<int>(phi.size())),
      k_(static_cast<int>(psi.size())) {
  if (r_ < 1) throw ScenarioError("at least one objective component is required");
  auto vars = std::make_shared<const std::vector<std::string>>(endpoint_vars(n));
  auto add = [&](const std::string& text) { comp_.push_back(expr::parse_shared(text, vars)); };
  for (const auto& s : phi0) add(s);
  for (const auto& s : phi) add(s);
  for (const auto& s : psi) add(s);

  std::size_t d = comp_.size();
  da_.resize(d);
  db_.resize(d);
  daa_.resize(d);
  dab_.resize(d);
  dbb_.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    for (int i = 0; i < n_; ++i) da_[c].push_back(comp_[c].differentiate(i));
    for (int i = 0; i < n_; ++i) db_[c].push_back(comp_[c].differentiate(n_ + i));
    daa_[c].resize(static_cast<std::size_t>(n_));
    dab_[c].resize(static_cast<std::size_t>(n_));
    dbb_[c].resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      for (int l = 0; l < n_; ++l) {
        daa_[c][static_cast<std::size_t>(i)].push_back(da_[c][static_cast<std::size_t>(i)]
                                                           .differentiate(l));
        dab_[c][static_cast<std::size_t>(i)].push_back(da_[c][static_cast<std::size_t>(i)]
                                                           .differentiate(n_ + l));
        dbb_[c][static_cast<std::size_t>(i)].push_back(db_[c][static_cast<std::size_t>(i)]
                                                           .differentiate(n_ + l));
      }
    }
  }
}

std::vector<double> EndpointData::bindings(const Vec& q0, const Vec& qT, double T) const {
  std::vector<double> b(static_cast<std::size_t>(2 * n_ + 1));
  for (int i = 0; i < n_; ++i) b[static_cast<std::size_t>(i)] = q0[i];
  for (int i = 0; i < n_; ++i) b[static_cast<std::size_t>(n_ + i)] = qT[i];
  b[static_cast<std::size_t>(2 * n_)] = T;
  return b;
}

Vec EndpointData::values(const Vec& q0, const Vec& qT, double T) const {
  auto b = bindings(q0, qT, T);
  Vec out(total());
  for (int c = 0; c < total(); ++c) out[c] = comp_[static_cast<std::size_t>(c)].eval(b);
  return out;
}

double EndpointData::value(int comp, const Vec& q0, const Vec& qT, double T) const {
  return comp_[static_cast<std::size_t>(comp)].eval(bindings(q0, qT, T));
}

Vec EndpointData::d1(int comp, const Vec& q0, const Vec& qT, double T) const {
  auto b = bindings(q0, qT, T);
  Vec out(n_);
  for (int i = 0; i < n_; ++i)
    out[i] = da_[static_cast<std::size_t>(comp)][static_cast<std::size_t>(i)].eval(b);
  return out;
}

Vec EndpointData::d2(int comp, const Vec& q0, const Vec& qT, double T) const {
  auto b = bindings(q0, qT, T);
  Vec out(n_);
  for (int i = 0; i < n_; ++i)
    out[i] = db_[static_cast<std::size_t>(comp)][static_cast<std::size_t>(i)].eval(b);
  return out;
}

double EndpointData::d2_quadratic(const geom::Manifold& M, int comp, const Vec& q0,
                                  const Vec& qT, double T, const Vec& X0, const Vec& XT) const {
  auto b = bindings(q0, qT, T);
  auto c = static_cast<std::size_t>(comp);
  Mat haa(n_, n_), hab(n_, n_), hbb(n_, n_);
  Vec ga(n_), gb(n_);
  for (int i = 0; i < n_; ++i) {
    ga[i] = da_[c][static_cast<std::size_t>(i)].eval(b);
    gb[i] = db_[c][static_cast<std::size_t>(i)].eval(b);
    for (int l = 0; l < n_; ++l) {
      haa(i, l) = daa_[c][static_cast<std::size_t>(i)][static_cast<std::size_t>(l)].eval(b);
      hab(i, l) = dab_[c][static_cast<std::size_t>(i)][static_cast<std::size_t>(l)].eval(b);
      hbb(i, l) = dbb_[c][static_cast<std::size_t>(i)][static_cast<std::size_t>(l)].eval(b);
    }
  }
  auto gamma0 = M.christoffel_at(q0);
  auto gammaT = M.christoffel_at(qT);
  for (int eta = 0; eta < n_; ++eta) {
    haa -= ga[eta] * gamma0[static_cast<std::size_t>(eta)];
    hbb -= gb[eta] * gammaT[static_cast<std::size_t>(eta)];
  }
  return X0.dot(haa * X0) + 2.0 * X0.dot(hab * XT) + XT.dot(hbb * XT);
}

HamiltonianDerivs hamiltonian_derivs(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                     double t, const Vec& q, const Vec& p, const Vec& u) {
  int n = sys.state_dim();
  HamiltonianDerivs out;
  Vec fval = sys.f(t, q, u);
  Mat J = sys.dfdx(t, q, u);
  Mat B = sys.dfdu(t, q, u);
  out.H = p.dot(fval);
  out.dHdx = J.transpose() * p;
  out.dHdu = B.transpose() * p;

  auto d2xx = sys.d2fdxx(t, q, u);
  auto d2xu = sys.d2fdxu(t, q, u);
  auto d2uu = sys.d2fduu(t, q, u);
  out.hess_x = Mat::Zero(n, n);
  out.d2Hdxdu = Mat::Zero(n, sys.control_dim());
  out.d2Hdu2 = Mat::Zero(sys.control_dim(), sys.control_dim());
  for (int i = 0; i < n; ++i) {
    out.hess_x += p[i] * d2xx[static_cast<std::size_t>(i)];
    out.d2Hdxdu += p[i] * d2xu[static_cast<std::size_t>(i)];
    out.d2Hdu2 += p[i] * d2uu[static_cast<std::size_t>(i)];
  }
  if (!M.is_flat()) {
    auto gamma = M.christoffel_at(q);
    for (int eta = 0; eta < n; ++eta)
      out.hess_x -= out.dHdx[eta] * gamma[static_cast<std::size_t>(eta)];
  }
  out.dHdt = p.dot(sys.dfdt(t, q, u));
  out.d2Hdt2 = p.dot(sys.d2fdtt(t, q, u));
  out.d2Hdxdt = sys.d2fdxdt(t, q, u).transpose() * p;
  out.d2Hdudt = sys.d2fdudt(t, q, u).transpose() * p;
  return out;
}

LagrangianBundle lagrangian_derivs(const EndpointData& ep, const Vec& ell, const Vec& q0,
                                   const Vec& qT, double T) {
  if (ell.size() != ep.total()) throw ScenarioError("multiplier dimension mismatch");
  LagrangianBundle out;
  out.d1 = Vec::Zero(ep.n());
  out.d2 = Vec::Zero(ep.n());
  Vec vals = ep.values(q0, qT, T);
  for (int c = 0; c < ep.total(); ++c) {
    if (ell[c] == 0.0) continue;
    out.L += ell[c] * vals[c];
    out.d1 += ell[c] * ep.d1(c, q0, qT, T);
    out.d2 += ell[c] * ep.d2(c, q0, qT, T);
  }
  return out;
}

double lagrangian_d2_quadratic(const EndpointData& ep, const geom::Manifold& M, const Vec& ell,
                               const Vec& q0, const Vec& qT, double T, const Vec& X0,
                               const Vec& XT) {
  double out = 0.0;
  for (int c = 0; c < ep.total(); ++c) {
    if (ell[c] == 0.0) continue;
    out += ell[c] * ep.d2_quadratic(M, c, q0, qT, T, X0, XT);
  }
  return out;
}

bool MultiplierFamily::member(const Vec& ell, double tol) const {
  if (ell.size() != A.cols()) return false;
  if (ell.cwiseAbs().maxCoeff() < 1e-12) return false;
  if ((A * ell).cwiseAbs().maxCoeff() > tol) return false;
  for (int c : pinned_zero)
    if (std::abs(ell[c]) > tol) return false;
  for (int c : sign_constrained)
    if (ell[c] > tol) return false;
  return true;
}

std::vector<Vec> MultiplierFamily::sample_cross_section(int count, std::uint64_t seed) const {
  std::vector<Vec> out;
  if (empty()) return out;
  DetRng rng(seed);
  Eigen::Index d = A.cols();
  out.reserve(static_cast<std::size_t>(count));
  int attempts = 0;
  if (sampled_only) {
    // No generator description: sample the nullspace directly and project
    // onto the sign constraints.
    Eigen::Index q = nullspace.cols();
    while (static_cast<int>(out.size()) < count && attempts < 50 * count) {
      ++attempts;
      Vec z(q);
      for (Eigen::Index i = 0; i < q; ++i) z[i] = rng.normal();
      for (int pass = 0; pass < 32; ++pass)
        for (int c : sign_constrained) {
          Vec row = nullspace.row(c).transpose();
          double s = row.dot(z);
          if (s > 0.0 && row.squaredNorm() > 0.0) z -= row * (s / row.squaredNorm());
        }
      Vec ell = nullspace * z;
      double norm1 = ell.cwiseAbs().sum();
      if (norm1 < 1e-12) continue;
      ell /= norm1;
      if (member(ell)) out.push_back(ell);
    }
    return out;
  }
  while (static_cast<int>(out.size()) < count && attempts < 20 * count) {
    ++attempts;
    Vec ell = Vec::Zero(d);
    for (const auto& r : rays) ell += rng.uniform() * r;
    for (const auto& l : lineality) ell += rng.uniform(-1.0, 1.0) * l;
    double norm1 = ell.cwiseAbs().sum();
    if (norm1 < 1e-12) continue;
    out.push_back(ell / norm1);
  }
  return out;
}

MultiplierFamily solve_multiplier_cone(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                       const dyn::Trajectory& traj, const EndpointData& ep,
                                       const Tolerances& tol, const std::vector<int>* ia_prime) {
  int d = ep.total();
  int n = ep.n();
  MultiplierFamily fam;
  fam.active_set = compute_active_set(ep, traj, tol.active);

  // Transversality defect map: column c is p_c(0) + d1(c) for the adjoint
  // solution with p_c(T) = d2(c).
  fam.A = Mat::Zero(n, d);
  const Vec& q0 = traj.initial_state();
  const Vec& qT = traj.final_state();
  for (int c = 0; c < d; ++c) {
    Vec pT = ep.d2(c, q0, qT, traj.T);
    auto field = dyn::integrate_adjoint(sys, M, traj, pT);
    fam.A.col(c) = field.fn.values.front() + ep.d1(c, q0, qT, traj.T);
  }

  auto in_active = [&](int c) {
    return std::find(fam.active_set.begin(), fam.active_set.end(), c) != fam.active_set.end();
  };
  for (int c = 0; c < d; ++c) {
    if (ep.is_inequality(c) && !in_active(c)) fam.pinned_zero.push_back(c);
    if (!ep.is_equality(c) && in_active(c)) fam.sign_constrained.push_back(c);
  }
  if (ia_prime) {
    for (int c : fam.active_set)
      if (std::find(ia_prime->begin(), ia_prime->end(), c) == ia_prime->end())
        fam.pinned_zero.push_back(c);
  }

  // Nullspace of the equality part (transversality rows + pinned components).
  Mat eq(n + static_cast<int>(fam.pinned_zero.size()), d);
  eq.topRows(n) = fam.A;
  for (std::size_t i = 0; i < fam.pinned_zero.size(); ++i)
    eq.row(n + static_cast<Eigen::Index>(i)) =
        Vec::Unit(d, fam.pinned_zero[i]).transpose();
  Eigen::JacobiSVD<Mat> svd(eq, Eigen::ComputeFullV);
  double smax = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
  double cutoff = 1e-9 * std::max(1.0, smax);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > cutoff) ++rank;
  int q = d - rank;
  if (q == 0) return fam;  // only ℓ = 0 satisfies the equalities
  fam.nullspace = svd.matrixV().rightCols(q);

  // Sign constraints expressed in nullspace coordinates.
  Mat C(static_cast<Eigen::Index>(fam.sign_constrained.size()), q);
  for (std::size_t i = 0; i < fam.sign_constrained.size(); ++i)
    C.row(static_cast<Eigen::Index>(i)) = fam.nullspace.row(fam.sign_constrained[i]);

  if (q > 8) {
    fam.sampled_only = true;
    return fam;
  }
  auto gens = dd::extreme_rays(C, q);
  for (const auto& z : gens.rays) {
    Vec ell = fam.nullspace * z;
    double norm1 = ell.cwiseAbs().sum();
    if (norm1 < 1e-12) continue;
    ell /= norm1;
    fam.rays.push_back(ell);
    fam.max_ray_defect = std::max(fam.max_ray_defect, (fam.A * ell).cwiseAbs().maxCoeff());
  }
  for (const auto& z : gens.lineality) {
    Vec ell = fam.nullspace * z;
    double norm = ell.norm();
    if (norm < 1e-12) continue;
    fam.lineality.push_back(ell / norm);
  }
  return fam;
}

FirstOrderProfile check_first_order(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                    const dyn::Trajectory& traj, const EndpointData& ep,
                                    const Vec& ell, const cones::ConvexSet& U,
                                    const Tolerances& tol) {
  FirstOrderProfile out;
  Vec pT = lagrangian_derivs(ep, ell, traj.initial_state(), traj.final_state(), traj.T).d2;
  auto p = dyn::integrate_adjoint(sys, M, traj, pT);
  std::size_t count = traj.states.size();
  out.sup_per_node.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = traj.states.time_at(k);
    Vec u = traj.controls.at(t);
    Vec c = sys.dfdu(t, traj.states.values[k], u).transpose() * p.fn.values[k];
    auto cone = cones::adjacent_cone(U, u, tol.cone);
    auto sup = cones::support_over_cone(cone, c);
    out.sup_per_node[k] = sup.value;
    out.sampled_support = out.sampled_support || sup.sampled;
    out.max_violation = std::max(out.max_violation, sup.value);
  }
  out.holds = out.max_violation <= tol.first_order;
  return out;
}

SingularCheck verify_singular_direction(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                        const dyn::Trajectory& traj, const dyn::Signal& v,
                                        const dyn::Signal* xi, const EndpointData& ep,
                                        const cones::ConvexSet& U, const Vec& X0,
                                        const MultiplierFamily* family, const Tolerances& tol) {
  SingularCheck out;
  std::size_t count = traj.states.size();

  out.cone_ok = true;
  for (std::size_t k = 0; k < count && out.cone_ok; ++k) {
    double t = traj.states.time_at(k);
    auto cone = cones::adjacent_cone(U, traj.controls.at(t), tol.cone);
    if (!cone.contains(v.at(t), tol.cone)) out.cone_ok = false;
  }

  out.X = xi ? dyn::integrate_first_variation_free_time(sys, M, traj, *xi, v, X0)
             : dyn::integrate_first_variation(sys, M, traj, v, X0);

  const Vec& q0 = traj.initial_state();
  const Vec& qT = traj.final_state();
  const Vec& X0v = out.X.fn.values.front();
  const Vec& XTv = out.X.fn.values.back();
  out.ia = compute_active_set(ep, traj, tol.active);
  out.endpoint_terms = Vec::Zero(ep.total());
  for (int c = 0; c < ep.total(); ++c)
    out.endpoint_terms[c] =
        ep.d1(c, q0, qT, traj.T).dot(X0v) + ep.d2(c, q0, qT, traj.T).dot(XTv);
  for (int c : out.ia) {
    out.max_inequality_violation =
        std::max(out.max_inequality_violation, out.endpoint_terms[c]);
    if (std::abs(out.endpoint_terms[c]) <= tol.ia_prime) out.ia_prime.push_back(c);
  }
  for (int c = 0; c < ep.total(); ++c)
    if (ep.is_equality(c))
      out.max_equality_residual =
          std::max(out.max_equality_residual, std::abs(out.endpoint_terms[c]));
  out.endpoint_ok = out.max_inequality_violation <= tol.singular &&
                    out.max_equality_residual <= tol.singular;

  if (family) {
    for (const auto& ray : family->rays) {
      Vec pT = lagrangian_derivs(ep, ray, q0, qT, traj.T).d2;
      auto p = dyn::integrate_adjoint(sys, M, traj, pT);
      double worst = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        double t = traj.states.time_at(k);
        Vec c = sys.dfdu(t, traj.states.values[k], traj.controls.at(t)).transpose() *
                p.fn.values[k];
        worst = std::max(worst, std::abs(c.dot(v.at(t))));
      }
      out.degeneracy_per_ray.push_back(worst);
      out.max_degeneracy = std::max(out.max_degeneracy, worst);
    }
  }

  // Sampled spot check of the d_U(ū + εv) <= ε² η hypothesis.
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    double worst = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      double t = traj.states.time_at(k);
      worst = std::max(worst, U.distance(traj.controls.at(t) + eps * v.at(t)) / (eps * eps));
    }
    out.du_ratio = std::max(out.du_ratio, worst);
  }
  return out;
}

SecondOrderBreakdown second_order_lhs(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                      const dyn::Trajectory& traj, const EndpointData& ep,
                                      const Vec& ell, const dyn::Signal& v,
                                      const dyn::VariationField& X, const dyn::Signal& sigma) {
  auto terms = second_order_node_terms(sys, M, traj, ep, ell, v, X, sigma);
  double h = traj.dt();
  SecondOrderBreakdown out;
  out.term_sigma = simpson(terms.sigma, h);
  out.term_hess_x = simpson(terms.hess, h);
  out.term_mixed_xu = simpson(terms.mixed, h);
  out.term_uu = simpson(terms.uu, h);
  out.term_curvature = simpson(terms.curv, h);
  out.term_d2l = lagrangian_d2_quadratic(ep, M, ell, traj.initial_state(), traj.final_state(),
                                         traj.T, X.fn.values.front(), X.fn.values.back());
  out.total = out.term_sigma + out.term_hess_x + out.term_mixed_xu + out.term_uu +
              out.term_curvature + out.term_d2l;
  return out;
}

SupResult second_order_sup(const dyn::ControlSystem& sys, const geom::Manifold& M,
                           const dyn::Trajectory& traj, const EndpointData& ep, const Vec& ell,
                           const dyn::Signal& v, const dyn::VariationField& X,
                           const std::vector<cones::ShiftedConeRepr>& sigma_sets) {
  std::size_t count = traj.states.size();
  if (sigma_sets.size() != count)
    throw ScenarioError("one second-order set per grid node is required");
  dyn::Signal zero = dyn::Signal::constant(Vec::Zero(sys.control_dim()), 0.0, traj.dt(), 2);
  auto base = second_order_lhs(sys, M, traj, ep, ell, v, X, zero);
  auto terms = second_order_node_terms(sys, M, traj, ep, ell, v, X, zero);
  SupResult out;
  double acc = base.total;
  double h = traj.dt();
  for (std::size_t k = 0; k < count; ++k) {
    auto res = cones::sup_affine_over_shifted(sigma_sets[k], 2.0 * terms.dHdu[k], 0.0);
    if (res.unbounded) {
      out.unbounded = true;
      out.value = kInf;
      return out;
    }
    acc += simpson_weight(k, count, h) * res.value;
  }
  out.value = acc;
  return out;
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::CertifiedNotWeakPareto:
      return "certified-not-weak-pareto";
    case Verdict::Inconclusive:
      return "inconclusive";
    case Verdict::InfeasibleFirstOrder:
      return "infeasible-first-order";
    case Verdict::AdmissibilityFailed:
      return "admissibility-failed";
  }
  return "unknown";
}

CertifyResult certify_not_weak_pareto(const dyn::ControlSystem& sys, const geom::Manifold& M,
                                      const dyn::Trajectory& traj, const EndpointData& ep,
                                      const cones::ConvexSet& U, const dyn::Signal& v,
                                      const dyn::Signal* xi, const Vec& X0,
                                      const dyn::Signal& sigma, const CertifyOptions& opts) {
  CertifyResult res;
  const Tolerances& tol = opts.tol;
  const Vec& q0 = traj.initial_state();
  const Vec& qT = traj.final_state();

  // Admissibility of the candidate.
  Vec vals = ep.values(q0, qT, traj.T);
  for (int c = 0; c < ep.total(); ++c) {
    bool bad = (ep.is_inequality(c) && vals[c] > tol.admissible) ||
               (ep.is_equality(c) && std::abs(vals[c]) > tol.admissible);
    if (bad) {
      res.verdict = Verdict::AdmissibilityFailed;
      res.note = "endpoint constraint " + std::to_string(c) + " violated by candidate";
      return res;
    }
  }
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (!U.contains(traj.controls.at(traj.states.time_at(k)), tol.cone)) {
      res.verdict = Verdict::AdmissibilityFailed;
      res.note = "candidate control leaves the control set at node " + std::to_string(k);
      return res;
    }
  }

  // Singular direction, with degeneracy reported against the unrestricted family.
  auto fam0 = solve_multiplier_cone(sys, M, traj, ep, tol);
  res.singular = verify_singular_direction(sys, M, traj, v, xi, ep, U, X0, &fam0, tol);
  if (!res.singular.ok())
    throw ScenarioError("singular direction verification failed (cone or endpoint residuals)");

  res.family = solve_multiplier_cone(sys, M, traj, ep, tol, &res.singular.ia_prime);
  if (res.family.empty()) {
    res.verdict = Verdict::InfeasibleFirstOrder;
    res.margin_unbounded = true;
    res.note = "no nonzero multiplier satisfies transversality and the sign pattern";
    return res;
  }

  const dyn::VariationField& X = res.singular.X;
  std::size_t count = traj.states.size();
  double h = traj.dt();

  // Pointwise second-order adjacent sets of the control set.
  std::vector<cones::ShiftedConeRepr> sigma_sets;
  sigma_sets.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = traj.states.time_at(k);
    sigma_sets.push_back(cones::second_order_set(U, traj.controls.at(t), v.at(t), tol.cone));
  }

  // The breakdown is linear in ℓ, and the adjoint is linear in p(T): build
  // per-basis data once and combine per sampled multiplier.
  int d = ep.total();
  dyn::Signal zero = dyn::Signal::constant(Vec::Zero(sys.control_dim()), 0.0, h, 2);
  auto breakdown_at = [&](const Vec& ell, const dyn::Signal& sg) {
    return xi ? free_time_second_order_lhs(sys, M, traj, ep, ell, *xi, v, X, sg)
              : second_order_lhs(sys, M, traj, ep, ell, v, X, sg);
  };
  Vec base_totals(d);
  std::vector<Mat> p_basis(count, Mat(ep.n(), d));  // columns: p_{e_c}(t_k)
  for (int c = 0; c < d; ++c) {
    Vec e = Vec::Unit(d, c);
    base_totals[c] = breakdown_at(e, zero).total;
    Vec pT = ep.d2(c, q0, qT, traj.T);
    auto p = dyn::integrate_adjoint(sys, M, traj, pT);
    for (std::size_t k = 0; k < count; ++k) p_basis[k].col(c) = p.fn.values[k];
  }
  std::vector<Mat> Bt(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = traj.states.time_at(k);
    Bt[k] = sys.dfdu(t, traj.states.values[k], traj.controls.at(t)).transpose();
  }

  auto eval_sup = [&](const Vec& ell) -> SupResult {
    SupResult s;
    double acc = base_totals.dot(ell);
    for (std::size_t k = 0; k < count; ++k) {
      Vec c = 2.0 * (Bt[k] * (p_basis[k] * ell));
      auto r = cones::sup_affine_over_shifted(sigma_sets[k], c, 0.0);
      if (r.unbounded) {
        s.unbounded = true;
        s.value = kInf;
        return s;
      }
      acc += simpson_weight(k, count, h) * r.value;
    }
    s.value = acc;
    return s;
  };

  double best = kInf;
  bool any_finite = false;
  Vec best_ell;
  auto consider = [&](const Vec& ell, SupResult s) {
    if (!s.unbounded) {
      any_finite = true;
      if (s.value < best) {
        best = s.value;
        best_ell = ell;
      }
    }
  };

  for (const auto& ray : res.family.rays) {
    RayEvaluation re;
    re.ell = ray;
    re.sup = eval_sup(ray);
    re.first_order_violation =
        check_first_order(sys, M, traj, ep, ray, U, tol).max_violation;
    re.breakdown = breakdown_at(ray, sigma);
    consider(ray, re.sup);
    res.ray_table.push_back(std::move(re));
  }
  for (const auto& ell : res.family.sample_cross_section(opts.samples, opts.seed))
    consider(ell, eval_sup(ell));

  // The sup is +inf outside the finite face {ℓ : 2∇_u H(t_k) lies in the
  // dual cone of every σ-set}. For whole-space and single-halfspace sets
  // that face is cut out by linear equalities on ℓ; when it is a proper
  // subcone the random cross-section misses it, so enumerate it explicitly.
  {
    std::vector<Vec> fin_rows;
    for (std::size_t k = 0; k < count; ++k) {
      const auto& S = sigma_sets[k];
      if (S.normals.rows() > 1) continue;
      Mat Ck = 2.0 * (Bt[k] * p_basis[k]);  // c_k(ℓ) = Ck ℓ
      if (S.normals.rows() == 1) {
        Vec nk = S.normals.row(0).transpose();
        Ck -= nk * (nk.transpose() * Ck) / nk.squaredNorm();
      }
      for (Eigen::Index r = 0; r < Ck.rows(); ++r)
        if (Ck.row(r).norm() > 1e-12) fin_rows.push_back(Ck.row(r).transpose());
    }
    if (!fin_rows.empty() && res.family.nullspace.cols() > 0) {
      Mat eq(static_cast<Eigen::Index>(fin_rows.size()), d);
      for (std::size_t r = 0; r < fin_rows.size(); ++r)
        eq.row(static_cast<Eigen::Index>(r)) = fin_rows[r].transpose();
      // Restrict to the family's nullspace coordinates and split off the
      // kernel of the finiteness rows.
      Mat eq_z = eq * res.family.nullspace;
      Eigen::JacobiSVD<Mat> svd(eq_z, Eigen::ComputeFullV);
      double smax = svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
      double cutoff = 1e-9 * std::max(1.0, smax);
      int rank = 0;
      for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > cutoff) ++rank;
      if (rank > 0 && rank < res.family.nullspace.cols()) {
        Mat kernel = svd.matrixV().rightCols(res.family.nullspace.cols() - rank);
        Mat face_basis = res.family.nullspace * kernel;
        Mat C(static_cast<Eigen::Index>(res.family.sign_constrained.size()),
              face_basis.cols());
        for (std::size_t i = 0; i < res.family.sign_constrained.size(); ++i)
          C.row(static_cast<Eigen::Index>(i)) =
              face_basis.row(res.family.sign_constrained[i]);
        auto gens = dd::extreme_rays(C, static_cast<int>(face_basis.cols()));
        std::vector<Vec> face_points;
        for (const auto& z : gens.rays) face_points.push_back(face_basis * z);
        for (const auto& z : gens.lineality) {
          face_points.push_back(face_basis * z);
          face_points.push_back(-face_basis * z);
        }
        DetRng rng(opts.seed + 1);
        for (int s = 0; s < std::min(opts.samples, 2000); ++s) {
          Vec ell = Vec::Zero(d);
          for (const auto& z : gens.rays) ell += rng.uniform() * (face_basis * z);
          for (const auto& z : gens.lineality)
            ell += rng.uniform(-1.0, 1.0) * (face_basis * z);
          face_points.push_back(ell);
        }
        for (Vec& ell : face_points) {
          double norm1 = ell.cwiseAbs().sum();
          if (norm1 < 1e-12) continue;
          ell /= norm1;
          if (res.family.member(ell)) consider(ell, eval_sup(ell));
        }
      }
    }
  }

  if (!any_finite) {
    // Every sampled multiplier makes the sup +inf: the inequality fails for all.
    res.verdict = Verdict::CertifiedNotWeakPareto;
    res.margin_unbounded = true;
    res.margin = kInf;
    return res;
  }
  res.margin = best;
  res.minimizing_ell = best_ell;
  res.verdict = best > tol.margin ? Verdict::CertifiedNotWeakPareto : Verdict::Inconclusive;
  return res;
}

UnitReparam reparameterize_to_unit(const dyn::Trajectory& traj) {
  if (traj.T <= 0.0) throw ScenarioError("reparameterization needs T > 0");
  UnitReparam rep;
  rep.Tbar = traj.T;
  rep.unit = traj;
  rep.unit.T = 1.0;
  rep.unit.horizon = dyn::Horizon::Fixed;
  rep.unit.states.dt = 1.0 / traj.N;
  rep.unit.controls.fn.dt = rep.unit.states.dt * (traj.controls.fn.dt / traj.states.dt);
  for (auto& dv : rep.unit.states.derivs) dv *= rep.Tbar;  // dy/ds = T·f
  return rep;
}

dyn::Trajectory reparameterize_back(const UnitReparam& rep) {
  dyn::Trajectory traj = rep.unit;
  traj.T = rep.Tbar;
  traj.horizon = dyn::Horizon::Free;
  traj.states.dt = rep.Tbar / traj.N;
  traj.controls.fn.dt = traj.states.dt * (rep.unit.controls.fn.dt / rep.unit.states.dt);
  for (auto& dv : traj.states.derivs) dv /= rep.Tbar;
  return traj;
}

FreeTimeResidual free_time_first_order_residual(const dyn::ControlSystem& sys,
                                                const geom::Manifold& M,
                                                const dyn::Trajectory& traj,
                                                const EndpointData& ep, const Vec& ell) {
  FreeTimeResidual out;
  Vec pT = lagrangian_derivs(ep, ell, traj.initial_state(), traj.final_state(), traj.T).d2;
  auto p = dyn::integrate_adjoint(sys, M, traj, pT);
  std::size_t count = traj.states.size();
  double h = traj.dt();
  auto dHdt_at = [&](double t) {
    Vec x = traj.state_at(t);
    Vec u = traj.control_at(t);
    return p.fn.at(t).dot(sys.dfdt(t, x, u));
  };
  // Tail integrals from the right, per-interval Simpson with midpoints.
  std::vector<double> tail(count, 0.0);
  for (std::size_t k = count - 1; k-- > 0;) {
    double t0 = traj.states.time_at(k);
    double t1 = t0 + h;
    tail[k] = tail[k + 1] +
              (h / 6.0) * (dHdt_at(t0) + 4.0 * dHdt_at(0.5 * (t0 + t1)) + dHdt_at(t1));
  }
  out.profile.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    double H = p.fn.values[k].dot(traj.states.derivs[k]);
    out.profile[k] = std::abs(H + tail[k]);
    out.max_residual = std::max(out.max_residual, out.profile[k]);
  }
  return out;
}

SecondOrderBreakdown free_time_second_order_lhs(const dyn::ControlSystem& sys,
                                                const geom::Manifold& M,
                                                const dyn::Trajectory& traj,
                                                const EndpointData& ep, const Vec& ell,
                                                const dyn::Signal& xi, const dyn::Signal& v,
                                                const dyn::VariationField& X,
                                                const dyn::Signal& sigma) {
  SecondOrderBreakdown out = second_order_lhs(sys, M, traj, ep, ell, v, X, sigma);
  std::size_t count = traj.states.size();
  double h = traj.dt();
  double Tbar = traj.T;
  Vec pT = lagrangian_derivs(ep, ell, traj.initial_state(), traj.final_state(), traj.T).d2;
  auto p = dyn::integrate_adjoint(sys, M, traj, pT);

  std::vector<double> xi_int(count, 0.0);
  for (std::size_t k = 1; k < count; ++k)
    xi_int[k] = xi_int[k - 1] + 0.5 * h * (xi.at(traj.states.time_at(k - 1))[0] +
                                           xi.at(traj.states.time_at(k))[0]);

  std::vector<double> tt(count), xt(count), txi(count), ut(count), xix(count), xiu(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = traj.states.time_at(k);
    auto Hd = hamiltonian_derivs(sys, M, t, traj.states.values[k], p.fn.values[k],
                                 traj.controls.at(t));
    double I = xi_int[k] / Tbar;
    double xik = xi.at(t)[0];
    Vec Xk = X.fn.values[k];
    Vec vk = v.at(t);
    tt[k] = Hd.d2Hdt2 * I * I;
    xt[k] = 2.0 * I * Hd.d2Hdxdt.dot(Xk);
    txi[k] = (2.0 / (Tbar * Tbar)) * xi_int[k] * xik * Hd.dHdt;
    ut[k] = 2.0 * I * Hd.d2Hdudt.dot(vk);
    xix[k] = (2.0 / Tbar) * xik * Hd.dHdx.dot(Xk);
    xiu[k] = (2.0 / Tbar) * xik * Hd.dHdu.dot(vk);
  }
  out.ft_tt = simpson(tt, h);
  out.ft_xt = simpson(xt, h);
  out.ft_txi = simpson(txi, h);
  out.ft_ut = simpson(ut, h);
  out.ft_xix = simpson(xix, h);
  out.ft_xiu = simpson(xiu, h);
  out.total += out.ft_tt + out.ft_xt + out.ft_txi + out.ft_ut + out.ft_xix + out.ft_xiu;
  return out;
}

}  // namespace riemoc::cond
