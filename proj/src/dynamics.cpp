#include "riemoc/dynamics.hpp"

#include <cmath>

namespace riemoc::dyn {

namespace {

std::vector<std::string> system_vars(int n, int m) {
  std::vector<std::string> vars;
  vars.reserve(static_cast<std::size_t>(1 + n + m));
  vars.emplace_back("t");
  for (int i = 1; i <= n; ++i) vars.push_back("x" + std::to_string(i));
  for (int i = 1; i <= m; ++i) vars.push_back("u" + std::to_string(i));
  return vars;
}

}  // namespace

ControlSystem::ControlSystem(int n, int m, const std::vector<std::string>& f_components)
    : n_(n), m_(m) {
  if (n < 1 || m < 1) throw ScenarioError("control system needs n >= 1 and m >= 1");
  if (static_cast<int>(f_components.size()) != n)
    throw ScenarioError("expected " + std::to_string(n) + " dynamics components");
  auto vars = std::make_shared<const std::vector<std::string>>(system_vars(n, m));
  auto xi = [n](int i) { return 1 + i; };        // index of x_{i+1} in the bindings
  auto ui = [n](int w) { return 1 + n + w; };    // index of u_{w+1}

  f_.reserve(static_cast<std::size_t>(n));
  for (const auto& text : f_components) f_.push_back(expr::parse_shared(text, vars));

  fx_.resize(f_.size());
  fu_.resize(f_.size());
  fxx_.resize(f_.size());
  fxu_.resize(f_.size());
  fuu_.resize(f_.size());
  fxt_.resize(f_.size());
  fut_.resize(f_.size());
  for (std::size_t i = 0; i < f_.size(); ++i) {
    ft_.push_back(f_[i].differentiate(0));
    ftt_.push_back(ft_[i].differentiate(0));
    if (!ft_[i].is_zero()) autonomous_ = false;
    for (int l = 0; l < n; ++l) {
      fx_[i].push_back(f_[i].differentiate(xi(l)));
      fxt_[i].push_back(fx_[i].back().differentiate(0));
    }
    for (int w = 0; w < m; ++w) {
      fu_[i].push_back(f_[i].differentiate(ui(w)));
      fut_[i].push_back(fu_[i].back().differentiate(0));
    }
    fxx_[i].resize(static_cast<std::size_t>(n));
    fxu_[i].resize(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
      for (int q = 0; q < n; ++q) fxx_[i][static_cast<std::size_t>(l)].push_back(
          fx_[i][static_cast<std::size_t>(l)].differentiate(xi(q)));
      for (int w = 0; w < m; ++w) fxu_[i][static_cast<std::size_t>(l)].push_back(
          fx_[i][static_cast<std::size_t>(l)].differentiate(ui(w)));
    }
    fuu_[i].resize(static_cast<std::size_t>(m));
    for (int v = 0; v < m; ++v)
      for (int w = 0; w < m; ++w) fuu_[i][static_cast<std::size_t>(v)].push_back(
          fu_[i][static_cast<std::size_t>(v)].differentiate(ui(w)));
  }
}

std::vector<double> ControlSystem::bindings(double t, const Vec& x, const Vec& u) const {
  std::vector<double> b(static_cast<std::size_t>(1 + n_ + m_));
  b[0] = t;
  for (int i = 0; i < n_; ++i) b[static_cast<std::size_t>(1 + i)] = x[i];
  for (int w = 0; w < m_; ++w) b[static_cast<std::size_t>(1 + n_ + w)] = u[w];
  return b;
}

Vec ControlSystem::f(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Vec out(n_);
  for (int i = 0; i < n_; ++i) out[i] = f_[static_cast<std::size_t>(i)].eval(b);
  return out;
}

Mat ControlSystem::dfdx(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Mat out(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int l = 0; l < n_; ++l)
      out(i, l) = fx_[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)].eval(b);
  return out;
}

Mat ControlSystem::dfdu(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Mat out(n_, m_);
  for (int i = 0; i < n_; ++i)
    for (int w = 0; w < m_; ++w)
      out(i, w) = fu_[static_cast<std::size_t>(i)][static_cast<std::size_t>(w)].eval(b);
  return out;
}

Vec ControlSystem::dfdt(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Vec out(n_);
  for (int i = 0; i < n_; ++i) out[i] = ft_[static_cast<std::size_t>(i)].eval(b);
  return out;
}

Vec ControlSystem::d2fdtt(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Vec out(n_);
  for (int i = 0; i < n_; ++i) out[i] = ftt_[static_cast<std::size_t>(i)].eval(b);
  return out;
}

Mat ControlSystem::d2fdxdt(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Mat out(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int l = 0; l < n_; ++l)
      out(i, l) = fxt_[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)].eval(b);
  return out;
}

Mat ControlSystem::d2fdudt(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  Mat out(n_, m_);
  for (int i = 0; i < n_; ++i)
    for (int w = 0; w < m_; ++w)
      out(i, w) = fut_[static_cast<std::size_t>(i)][static_cast<std::size_t>(w)].eval(b);
  return out;
}

std::vector<Mat> ControlSystem::d2fdxx(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  std::vector<Mat> out(static_cast<std::size_t>(n_), Mat(n_, n_));
  for (int i = 0; i < n_; ++i)
    for (int l = 0; l < n_; ++l)
      for (int q = 0; q < n_; ++q)
        out[static_cast<std::size_t>(i)](l, q) = fxx_[static_cast<std::size_t>(i)]
            [static_cast<std::size_t>(l)][static_cast<std::size_t>(q)].eval(b);
  return out;
}

std::vector<Mat> ControlSystem::d2fdxu(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  std::vector<Mat> out(static_cast<std::size_t>(n_), Mat(n_, m_));
  for (int i = 0; i < n_; ++i)
    for (int l = 0; l < n_; ++l)
      for (int w = 0; w < m_; ++w)
        out[static_cast<std::size_t>(i)](l, w) = fxu_[static_cast<std::size_t>(i)]
            [static_cast<std::size_t>(l)][static_cast<std::size_t>(w)].eval(b);
  return out;
}

std::vector<Mat> ControlSystem::d2fduu(double t, const Vec& x, const Vec& u) const {
  auto b = bindings(t, x, u);
  std::vector<Mat> out(static_cast<std::size_t>(n_), Mat(m_, m_));
  for (int i = 0; i < n_; ++i)
    for (int v = 0; v < m_; ++v)
      for (int w = 0; w < m_; ++w)
        out[static_cast<std::size_t>(i)](v, w) = fuu_[static_cast<std::size_t>(i)]
            [static_cast<std::size_t>(v)][static_cast<std::size_t>(w)].eval(b);
  return out;
}

Signal Signal::constant(const Vec& value, double t0, double dt, std::size_t count) {
  Signal s;
  s.fn.t0 = t0;
  s.fn.dt = dt;
  s.fn.values.assign(count, value);
  return s;
}

Signal Signal::from_samples(std::vector<Vec> samples, double t0, double dt) {
  Signal s;
  s.fn.t0 = t0;
  s.fn.dt = dt;
  s.fn.values = std::move(samples);
  return s;
}

Signal Signal::from_exprs(const std::vector<std::string>& exprs, double t0, double dt,
                          std::size_t count) {
  std::vector<expr::Expr> parsed;
  parsed.reserve(exprs.size());
  for (const auto& text : exprs) parsed.push_back(expr::parse(text, {"t"}));
  Signal s;
  s.fn.t0 = t0;
  s.fn.dt = dt;
  s.fn.values.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = t0 + dt * static_cast<double>(k);
    Vec val(static_cast<Eigen::Index>(parsed.size()));
    for (std::size_t c = 0; c < parsed.size(); ++c) {
      double bind[1] = {t};
      val[static_cast<Eigen::Index>(c)] = parsed[c].eval(bind);
    }
    s.fn.values[k] = val;
  }
  return s;
}

Trajectory integrate_state(const ControlSystem& sys, const geom::Manifold& M, const Vec& x0,
                           const Signal& u, double T, int N, Horizon horizon) {
  if (N < 2 || N % 2 != 0) throw ScenarioError("grid size N must be even and >= 2");
  if (x0.size() != sys.state_dim()) throw ScenarioError("initial state dimension mismatch");
  (void)M;
  Trajectory traj;
  traj.T = T;
  traj.N = N;
  traj.horizon = horizon;
  traj.controls = u;
  traj.states.t0 = 0.0;
  traj.states.dt = T / N;
  traj.states.values.resize(static_cast<std::size_t>(N) + 1);
  traj.states.derivs.resize(static_cast<std::size_t>(N) + 1);
  auto rhs = [&](double t, const Vec& x) { return sys.f(t, x, u.at(t)); };
  Vec x = x0;
  double h = traj.states.dt;
  for (int k = 0;; ++k) {
    if (!x.allFinite())
      throw NumericError("state integration blew up at node " + std::to_string(k));
    try {
      traj.states.values[static_cast<std::size_t>(k)] = x;
      traj.states.derivs[static_cast<std::size_t>(k)] = rhs(h * k, x);
      if (k == N) break;
      x = rk4_step(rhs, h * k, x, h);
    } catch (const EvalError& e) {
      throw NumericError("state integration blew up at node " + std::to_string(k) + ": " +
                         e.what());
    }
  }
  return traj;
}

VariationField integrate_adjoint(const ControlSystem& sys, const geom::Manifold& M,
                                 const Trajectory& traj, const Vec& pT) {
  (void)M;
  VariationField field;
  field.frame_meaning = geom::TransportKind::Covector;
  field.role = FieldRole::Covector;
  field.fn.t0 = 0.0;
  field.fn.dt = traj.dt();
  std::size_t count = traj.states.size();
  field.fn.values.assign(count, Vec());
  field.fn.derivs.assign(count, Vec());
  auto rhs = [&](double t, const Vec& p) -> Vec {
    return -sys.dfdx(t, traj.state_at(t), traj.control_at(t)).transpose() * p;
  };
  double h = traj.dt();
  Vec p = pT;
  for (std::size_t k = count; k-- > 0;) {
    field.fn.values[k] = p;
    field.fn.derivs[k] = rhs(field.fn.time_at(k), p);
    if (k == 0) break;
    p = rk4_step(rhs, field.fn.time_at(k), p, -h);
  }
  return field;
}

VariationField integrate_first_variation(const ControlSystem& sys, const geom::Manifold& M,
                                         const Trajectory& traj, const Signal& v, const Vec& X0) {
  (void)M;
  VariationField field;
  field.role = FieldRole::StateVariation;
  field.fn.t0 = 0.0;
  field.fn.dt = traj.dt();
  std::size_t count = traj.states.size();
  field.fn.values.assign(count, Vec());
  field.fn.derivs.assign(count, Vec());
  auto rhs = [&](double t, const Vec& X) -> Vec {
    Vec x = traj.state_at(t);
    Vec u = traj.control_at(t);
    return sys.dfdx(t, x, u) * X + sys.dfdu(t, x, u) * v.at(t);
  };
  double h = traj.dt();
  Vec X = X0;
  for (std::size_t k = 0;; ++k) {
    field.fn.values[k] = X;
    field.fn.derivs[k] = rhs(field.fn.time_at(k), X);
    if (k + 1 == count) break;
    X = rk4_step(rhs, field.fn.time_at(k), X, h);
  }
  return field;
}

VariationField integrate_first_variation_free_time(const ControlSystem& sys,
                                                   const geom::Manifold& M,
                                                   const Trajectory& traj, const Signal& xi,
                                                   const Signal& v, const Vec& X0) {
  (void)M;
  VariationField field;
  field.role = FieldRole::StateVariation;
  field.fn.t0 = 0.0;
  field.fn.dt = traj.dt();
  std::size_t count = traj.states.size();
  field.fn.values.assign(count, Vec());
  field.fn.derivs.assign(count, Vec());
  double h = traj.dt();
  double Tbar = traj.T;

  // Running trapezoid integral of ξ at the nodes.
  std::vector<double> xi_int(count, 0.0);
  for (std::size_t k = 1; k < count; ++k)
    xi_int[k] = xi_int[k - 1] + 0.5 * h * (xi.at(field.fn.time_at(k - 1))[0] +
                                           xi.at(field.fn.time_at(k))[0]);
  auto xi_integral = [&](double t) {
    std::size_t k;
    double theta;
    field.fn.locate(t, k, theta);
    if (theta == 0.0) return xi_int[k];
    if (theta == 1.0) return xi_int[k + 1];
    double tk = field.fn.time_at(k);
    return xi_int[k] + 0.5 * (t - tk) * (xi.at(tk)[0] + xi.at(t)[0]);
  };

  auto rhs = [&](double t, const Vec& X) -> Vec {
    Vec x = traj.state_at(t);
    Vec u = traj.control_at(t);
    double xit = xi.at(t)[0];
    return sys.dfdx(t, x, u) * X + (xi_integral(t) / Tbar) * sys.dfdt(t, x, u) +
           (xit / Tbar) * sys.f(t, x, u) + sys.dfdu(t, x, u) * v.at(t);
  };
  Vec X = X0;
  for (std::size_t k = 0;; ++k) {
    field.fn.values[k] = X;
    field.fn.derivs[k] = rhs(field.fn.time_at(k), X);
    if (k + 1 == count) break;
    X = rk4_step(rhs, field.fn.time_at(k), X, h);
  }
  return field;
}

VariationField integrate_second_variation(const ControlSystem& sys, const geom::Manifold& M,
                                          const Trajectory& traj,
                                          const geom::ParallelFrame& frame,
                                          const VariationField& X_v, const Signal& v,
                                          const Signal& sigma, const Vec& W) {
  int n = sys.state_dim();
  if (!M.is_flat() && M.dim() > 2)
    throw ScenarioError("second variation supports flat or 2-D manifolds only");

  auto rhs = [&](double t, const Vec& Y) -> Vec {
    Vec x = traj.state_at(t);
    Vec u = traj.control_at(t);
    Vec vv = v.at(t);
    Vec ss = sigma.at(t);
    Vec X = X_v.at(t);
    Vec fval = sys.f(t, x, u);
    Mat J = sys.dfdx(t, x, u);
    Mat B = sys.dfdu(t, x, u);
    Mat E = frame.basis_at(t);
    Mat D = frame.dual_at(t);

    Mat a = J;  // chart components of ∇_x f: a_il = ∂f_i/∂ξ_l + Γ^i_{lw} f_w
    std::vector<Mat> gamma;
    std::vector<std::vector<Mat>> dgamma;
    if (!M.is_flat()) {
      gamma = M.christoffel_at(x);
      dgamma = M.christoffel_grad_at(x);
      for (int i = 0; i < n; ++i)
        a.row(i) += (gamma[static_cast<std::size_t>(i)] * fval).transpose();
    }

    Vec s_chart = Vec::Zero(n);
    auto d2xx = sys.d2fdxx(t, x, u);
    auto d2xu = sys.d2fdxu(t, x, u);
    auto d2uu = sys.d2fduu(t, x, u);
    for (int i = 0; i < n; ++i) {
      // ½ ∇²_x f(·, X, X): (∇²f)^i_{lm} = ∂_m a_il + Γ^i_{mq} a_ql − Γ^q_{ml} a_iq
      double hxx = 0.0;
      if (M.is_flat()) {
        hxx = X.dot(d2xx[static_cast<std::size_t>(i)] * X);
      } else {
        for (int l = 0; l < n; ++l)
          for (int mm = 0; mm < n; ++mm) {
            double tlm = d2xx[static_cast<std::size_t>(i)](l, mm);
            for (int w = 0; w < n; ++w) {
              tlm += dgamma[static_cast<std::size_t>(mm)][static_cast<std::size_t>(i)](l, w) *
                         fval[w] +
                     gamma[static_cast<std::size_t>(i)](l, w) * J(w, mm);
              tlm += gamma[static_cast<std::size_t>(i)](mm, w) * a(w, l);
              tlm -= gamma[static_cast<std::size_t>(w)](mm, l) * a(i, w);
            }
            hxx += tlm * X[l] * X[mm];
          }
      }
      s_chart[i] += 0.5 * hxx;

      // ∇_u ∇_x f(·, X, v): ∂²f_i/∂ξ_l∂u_w + Γ^i_{lq} ∂f_q/∂u_w
      double hxu = X.dot(d2xu[static_cast<std::size_t>(i)] * vv);
      if (!M.is_flat()) hxu += X.dot(gamma[static_cast<std::size_t>(i)] * (B * vv));
      s_chart[i] += hxu;

      // ½ ∇²_u f(·, v, v)
      s_chart[i] += 0.5 * vv.dot(d2uu[static_cast<std::size_t>(i)] * vv);
    }
    if (!M.is_flat()) {
      // −½ R(e_i, X, f, X) projects as +½K(|X|² f − <f,X> X) through the dual frame.
      double K = M.sectional_curvature_at(x);
      Mat g = M.metric_at(x).g;
      double XX = X.dot(g * X);
      double fX = fval.dot(g * X);
      s_chart += 0.5 * K * (XX * fval - fX * X);
    }

    return D * (a * (E * Y)) + (D * B) * ss + D * s_chart;
  };

  VariationField field;
  field.role = FieldRole::SecondVariation;
  field.parallel_frame = true;
  field.fn.t0 = 0.0;
  field.fn.dt = traj.dt();
  std::size_t count = traj.states.size();
  field.fn.values.assign(count, Vec());
  field.fn.derivs.assign(count, Vec());
  double h = traj.dt();
  Vec Y = frame.dual[0] * W;
  for (std::size_t k = 0;; ++k) {
    field.fn.values[k] = Y;
    field.fn.derivs[k] = rhs(field.fn.time_at(k), Y);
    if (k + 1 == count) break;
    Y = rk4_step(rhs, field.fn.time_at(k), Y, h);
  }
  return field;
}

Trajectory flow_perturbed(const ControlSystem& sys, const geom::Manifold& M,
                          const Trajectory& base, double eps, const Signal& v,
                          const Signal& sigma, const Vec& X0, const Vec& W,
                          int geodesic_steps) {
  Vec shift = eps * X0 + eps * eps * W;
  Vec x0 = base.initial_state();
  if (shift.norm() > 0.0) x0 = geom::geodesic_shoot(M, x0, shift, 1.0, geodesic_steps);
  std::size_t count = base.states.size();
  std::vector<Vec> samples(count);
  for (std::size_t k = 0; k < count; ++k) {
    double t = base.states.time_at(k);
    samples[k] = base.controls.at(t) + eps * v.at(t) + eps * eps * sigma.at(t);
  }
  Signal u = Signal::from_samples(std::move(samples), 0.0, base.dt());
  return integrate_state(sys, M, x0, u, base.T, base.N, base.horizon);
}

}  // namespace riemoc::dyn
