#include "riemoc/runner.hpp"

#include <chrono>
#include <cmath>

namespace riemoc::cli {

namespace {

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

json mat_to_json(const Mat& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(vec_to_json(m.row(r).transpose()));
  return j;
}

json breakdown_to_json(const cond::SecondOrderBreakdown& b) {
  json j;
  j["sigma"] = b.term_sigma;
  j["hess_x"] = b.term_hess_x;
  j["mixed_xu"] = b.term_mixed_xu;
  j["uu"] = b.term_uu;
  j["curvature"] = b.term_curvature;
  j["d2l"] = b.term_d2l;
  j["ft_tt"] = b.ft_tt;
  j["ft_xt"] = b.ft_xt;
  j["ft_txi"] = b.ft_txi;
  j["ft_ut"] = b.ft_ut;
  j["ft_xix"] = b.ft_xix;
  j["ft_xiu"] = b.ft_xiu;
  j["total"] = b.total;
  return j;
}

json family_to_json(const cond::MultiplierFamily& fam) {
  json j;
  j["A"] = mat_to_json(fam.A);
  j["active_set"] = fam.active_set;
  j["sign_constrained"] = fam.sign_constrained;
  j["pinned_zero"] = fam.pinned_zero;
  json rays = json::array();
  for (const auto& r : fam.rays) rays.push_back(vec_to_json(r));
  j["rays"] = rays;
  json lins = json::array();
  for (const auto& l : fam.lineality) lins.push_back(vec_to_json(l));
  j["lineality"] = lins;
  j["max_ray_defect"] = fam.max_ray_defect;
  j["sampled_only"] = fam.sampled_only;
  j["empty"] = fam.empty();
  return j;
}

json singular_to_json(const cond::SingularCheck& sc) {
  json j;
  j["cone_ok"] = sc.cone_ok;
  j["endpoint_ok"] = sc.endpoint_ok;
  j["endpoint_terms"] = vec_to_json(sc.endpoint_terms);
  j["max_inequality_violation"] = sc.max_inequality_violation;
  j["max_equality_residual"] = sc.max_equality_residual;
  j["ia"] = sc.ia;
  j["ia_prime"] = sc.ia_prime;
  j["degeneracy_per_ray"] = sc.degeneracy_per_ray;
  j["max_degeneracy"] = sc.max_degeneracy;
  j["du_ratio"] = sc.du_ratio;
  j["X_final"] = vec_to_json(sc.X.fn.values.back());
  return j;
}

struct Pipeline {
  Scenario sc;
  geom::Manifold M;
  dyn::ControlSystem sys;
  cond::EndpointData ep;
  dyn::Trajectory traj;
  dyn::Signal v, sigma;
  std::optional<dyn::Signal> xi;
  Vec X0;

  Pipeline(Scenario scenario)
      : sc(std::move(scenario)),
        M(sc.manifold()),
        sys(sc.system()),
        ep(sc.endpoints()),
        traj(dyn::integrate_state(sys, M, sc.x0, sc.candidate.realize(sc.T, grid_count()),
                                  sc.T, sc.grid_steps(), sc.horizon)) {
    std::size_t count = grid_count();
    if (sc.singular) {
      v = sc.singular->v.realize(sc.T, count);
      if (sc.singular->xi) xi = sc.singular->xi->realize(sc.T, count);
      X0 = sc.singular->X0;
      sigma = sc.singular->sigma ? sc.singular->sigma->realize(sc.T, count)
                                 : dyn::Signal::constant(Vec::Zero(sc.m), 0.0, sc.T, 2);
    } else {
      v = dyn::Signal::constant(Vec::Zero(sc.m), 0.0, sc.T, 2);
      sigma = dyn::Signal::constant(Vec::Zero(sc.m), 0.0, sc.T, 2);
      X0 = Vec::Zero(sc.n);
    }
  }

  std::size_t grid_count() const { return static_cast<std::size_t>(sc.grid_steps()) + 1; }

  cond::CertifyOptions certify_options() const {
    cond::CertifyOptions o;
    o.tol = sc.numerics.tol;
    o.samples = sc.numerics.samples;
    o.seed = sc.numerics.seed;
    return o;
  }

  json trajectory_summary() const {
    json j;
    j["N"] = traj.N;
    j["T"] = traj.T;
    j["x0"] = vec_to_json(traj.initial_state());
    j["xT"] = vec_to_json(traj.final_state());
    j["endpoint_values"] = vec_to_json(ep.values(traj.initial_state(), traj.final_state(),
                                                 traj.T));
    return j;
  }

  // Time series: state, adjoint (at ell), first variation, integrand terms,
  // sectional curvature along the path.
  void fill_csv(Report& rep, const Vec& ell) const {
    auto X = xi ? dyn::integrate_first_variation_free_time(sys, M, traj, *xi, v, X0)
                : dyn::integrate_first_variation(sys, M, traj, v, X0);
    auto terms = cond::second_order_node_terms(sys, M, traj, ep, ell, v, X, sigma);
    rep.csv_header = {"t"};
    for (int i = 1; i <= sc.n; ++i) rep.csv_header.push_back("x" + std::to_string(i));
    for (int i = 1; i <= sc.n; ++i) rep.csv_header.push_back("p" + std::to_string(i));
    for (int i = 1; i <= sc.n; ++i) rep.csv_header.push_back("X" + std::to_string(i));
    rep.csv_header.insert(rep.csv_header.end(),
                          {"term_sigma", "term_hess_x", "term_mixed_xu", "term_uu",
                           "term_curvature", "K"});
    std::size_t count = traj.states.size();
    rep.csv_rows.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> row;
      row.push_back(traj.states.time_at(k));
      for (int i = 0; i < sc.n; ++i) row.push_back(traj.states.values[k][i]);
      for (int i = 0; i < sc.n; ++i) row.push_back(terms.p.fn.values[k][i]);
      for (int i = 0; i < sc.n; ++i) row.push_back(X.fn.values[k][i]);
      row.push_back(terms.sigma[k]);
      row.push_back(terms.hess[k]);
      row.push_back(terms.mixed[k]);
      row.push_back(terms.uu[k]);
      row.push_back(terms.curv[k]);
      row.push_back(M.sectional_curvature_at(traj.states.values[k]));
      rep.csv_rows.push_back(std::move(row));
    }
  }

  void fill_simulation_csv(Report& rep) const {
    rep.csv_header = {"t"};
    for (int i = 1; i <= sc.n; ++i) rep.csv_header.push_back("x" + std::to_string(i));
    rep.csv_header.push_back("K");
    std::size_t count = traj.states.size();
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> row;
      row.push_back(traj.states.time_at(k));
      for (int i = 0; i < sc.n; ++i) row.push_back(traj.states.values[k][i]);
      row.push_back(M.sectional_curvature_at(traj.states.values[k]));
      rep.csv_rows.push_back(std::move(row));
    }
  }

  void require_singular_spec() const {
    if (!sc.singular)
      throw ScenarioError("this command needs a singular_direction block in the scenario");
  }
};

}  // namespace

Scenario resolve_scenario(const RunOptions& opts) {
  Scenario sc;
  if (!opts.builtin.empty()) {
    if (opts.builtin != "example-exg")
      throw ScenarioError("unknown builtin scenario: " + opts.builtin);
    sc = builtin_example(opts.T_override.value_or(1.0));
  } else if (!opts.scenario_path.empty()) {
    sc = load_scenario(opts.scenario_path);
    if (opts.T_override) sc.T = *opts.T_override;
  } else if (opts.command == "exg" || opts.command == "geometry-probe") {
    sc = builtin_example(opts.T_override.value_or(1.0));
  } else {
    throw ScenarioError("provide --scenario FILE or --builtin NAME");
  }
  if (opts.steps_override) sc.numerics.steps = *opts.steps_override;
  if (opts.samples_override) sc.numerics.samples = *opts.samples_override;
  if (opts.margin_override) sc.numerics.tol.margin = *opts.margin_override;
  if (opts.tol_override) {
    sc.numerics.tol.singular = *opts.tol_override;
    sc.numerics.tol.first_order = *opts.tol_override;
  }
  return sc;
}

Report run_command(const RunOptions& opts) {
  auto start = std::chrono::steady_clock::now();
  Scenario sc = resolve_scenario(opts);

  Report rep;
  rep.body["schema"] = "riemoc-report/1";
  rep.body["command"] = opts.command;
  rep.body["tool_version"] = "riemoc 1.0.0";
  rep.body["scenario"] = sc.to_json();
  {
    Report tmp;
    tmp.body = sc.to_json();
    rep.body["scenario_hash"] = tmp.content_hash();
  }

  const std::string& cmd = opts.command;
  if (cmd == "geometry-probe") {
    auto M = sc.manifold();
    Vec q = Vec::Zero(M.dim());
    if (!opts.probe_point.empty()) {
      if (static_cast<int>(opts.probe_point.size()) != M.dim())
        throw ScenarioError("--point dimension must match the manifold");
      for (int i = 0; i < M.dim(); ++i) q[i] = opts.probe_point[static_cast<std::size_t>(i)];
    }
    auto metric = M.metric_at(q);
    auto gamma = M.christoffel_at(q);
    json g;
    g["point"] = vec_to_json(q);
    g["metric"] = mat_to_json(metric.g);
    g["metric_inverse"] = mat_to_json(metric.g_inv);
    Eigen::SelfAdjointEigenSolver<Mat> es(metric.g);
    g["metric_eigenvalues"] = vec_to_json(es.eigenvalues());
    json gj = json::array();
    for (const auto& gk : gamma) gj.push_back(mat_to_json(gk));
    g["christoffel"] = gj;
    g["sectional_curvature"] = M.sectional_curvature_at(q);
    rep.body["geometry"] = g;
  } else if (cmd == "simulate") {
    Pipeline pl(sc);
    rep.body["trajectory"] = pl.trajectory_summary();
    pl.fill_simulation_csv(rep);
  } else if (cmd == "multipliers") {
    Pipeline pl(sc);
    rep.body["trajectory"] = pl.trajectory_summary();
    auto fam = cond::solve_multiplier_cone(pl.sys, pl.M, pl.traj, pl.ep, sc.numerics.tol);
    rep.body["multipliers"] = family_to_json(fam);
  } else if (cmd == "check1") {
    Pipeline pl(sc);
    auto fam = cond::solve_multiplier_cone(pl.sys, pl.M, pl.traj, pl.ep, sc.numerics.tol);
    rep.body["multipliers"] = family_to_json(fam);
    json rows = json::array();
    for (const auto& ray : fam.rays) {
      auto prof = cond::check_first_order(pl.sys, pl.M, pl.traj, pl.ep, ray, sc.control_set,
                                          sc.numerics.tol);
      json row;
      row["ell"] = vec_to_json(ray);
      row["max_violation"] = prof.max_violation;
      row["holds"] = prof.holds;
      row["sampled_support"] = prof.sampled_support;
      rows.push_back(row);
    }
    rep.body["first_order"] = rows;
  } else if (cmd == "singular") {
    Pipeline pl(sc);
    pl.require_singular_spec();
    auto fam = cond::solve_multiplier_cone(pl.sys, pl.M, pl.traj, pl.ep, sc.numerics.tol);
    auto scheck = cond::verify_singular_direction(
        pl.sys, pl.M, pl.traj, pl.v, pl.xi ? &*pl.xi : nullptr, pl.ep, sc.control_set, pl.X0,
        &fam, sc.numerics.tol);
    rep.body["multipliers"] = family_to_json(fam);
    rep.body["singular"] = singular_to_json(scheck);
  } else if (cmd == "check2" || cmd == "check2-free") {
    Pipeline pl(sc);
    pl.require_singular_spec();
    bool free_time = cmd == "check2-free";
    if (free_time && sc.horizon != dyn::Horizon::Free)
      throw ScenarioError("check2-free needs a free horizon scenario");
    auto fam = cond::solve_multiplier_cone(pl.sys, pl.M, pl.traj, pl.ep, sc.numerics.tol);
    auto scheck = cond::verify_singular_direction(
        pl.sys, pl.M, pl.traj, pl.v, pl.xi ? &*pl.xi : nullptr, pl.ep, sc.control_set, pl.X0,
        &fam, sc.numerics.tol);
    rep.body["multipliers"] = family_to_json(fam);
    rep.body["singular"] = singular_to_json(scheck);
    dyn::Signal xi_zero = dyn::Signal::constant(Vec::Zero(1), 0.0, sc.T, 2);
    json rows = json::array();
    for (const auto& ray : fam.rays) {
      cond::SecondOrderBreakdown b =
          free_time ? cond::free_time_second_order_lhs(pl.sys, pl.M, pl.traj, pl.ep, ray,
                                                       pl.xi ? *pl.xi : xi_zero, pl.v,
                                                       scheck.X, pl.sigma)
                    : cond::second_order_lhs(pl.sys, pl.M, pl.traj, pl.ep, ray, pl.v, scheck.X,
                                             pl.sigma);
      json row;
      row["ell"] = vec_to_json(ray);
      row["breakdown"] = breakdown_to_json(b);
      if (free_time) {
        auto res = cond::free_time_first_order_residual(pl.sys, pl.M, pl.traj, pl.ep, ray);
        row["free_time_first_order_residual"] = res.max_residual;
      }
      rows.push_back(row);
    }
    rep.body["second_order"] = rows;
    if (!fam.rays.empty()) pl.fill_csv(rep, fam.rays.front());
  } else if (cmd == "certify" || cmd == "exg") {
    Pipeline pl(sc);
    pl.require_singular_spec();
    auto res = cond::certify_not_weak_pareto(pl.sys, pl.M, pl.traj, pl.ep, sc.control_set,
                                             pl.v, pl.xi ? &*pl.xi : nullptr, pl.X0, pl.sigma,
                                             pl.certify_options());
    rep.body["trajectory"] = pl.trajectory_summary();
    rep.body["multipliers"] = family_to_json(res.family);
    if (res.verdict != cond::Verdict::AdmissibilityFailed)
      rep.body["singular"] = singular_to_json(res.singular);
    json rows = json::array();
    for (const auto& re : res.ray_table) {
      json row;
      row["ell"] = vec_to_json(re.ell);
      row["sup"] = re.sup.unbounded ? json("inf") : json(re.sup.value);
      row["first_order_violation"] = re.first_order_violation;
      row["breakdown"] = breakdown_to_json(re.breakdown);
      rows.push_back(row);
    }
    rep.body["second_order"] = rows;
    json cert;
    cert["verdict"] = cond::verdict_name(res.verdict);
    cert["margin"] = res.margin_unbounded ? json("inf") : json(res.margin);
    if (res.minimizing_ell.size() > 0) cert["minimizing_ell"] = vec_to_json(res.minimizing_ell);
    cert["samples"] = sc.numerics.samples;
    cert["seed"] = sc.numerics.seed;
    if (!res.note.empty()) cert["note"] = res.note;
    rep.body["certify"] = cert;
    rep.body["verdict"] = cond::verdict_name(res.verdict);
    if (res.verdict != cond::Verdict::AdmissibilityFailed) {
      Vec csv_ell = res.minimizing_ell.size() > 0
                        ? res.minimizing_ell
                        : (res.family.rays.empty() ? Vec() : res.family.rays.front());
      if (csv_ell.size() > 0) pl.fill_csv(rep, csv_ell);
    }
    if (cmd == "exg" && res.verdict != cond::Verdict::CertifiedNotWeakPareto)
      throw NumericError("exg pipeline did not certify the candidate");
  } else {
    throw ScenarioError("unknown command: " + cmd);
  }

  auto stop = std::chrono::steady_clock::now();
  rep.timing_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return rep;
}

}  // namespace riemoc::cli
