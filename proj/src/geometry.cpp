#include "riemoc/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace riemoc::geom {

namespace {

constexpr double kLogMapTol = 1e-10;
constexpr int kLogMapMaxIter = 50;

// Γ^k_{ij} γdot^i contracted into the matrix A with A(k,j) = Σ_i Γ^k_{ij} v^i.
Mat transport_matrix(const Manifold& M, const Vec& q, const Vec& v) {
  int n = M.dim();
  Mat A = Mat::Zero(n, n);
  if (M.is_flat()) return A;
  auto gamma = M.christoffel_at(q);
  for (int k = 0; k < n; ++k) A.row(k) = (gamma[static_cast<std::size_t>(k)] * v).transpose();
  return A;
}

}  // namespace

Manifold Manifold::flat(int dim) {
  if (dim < 1) throw ScenarioError("flat manifold needs dim >= 1");
  Manifold m;
  m.dim_ = dim;
  m.flat_ = true;
  return m;
}

Manifold Manifold::graph(const expr::Expr& height, double fd_step) {
  if (height.variables() != std::vector<std::string>{"x1", "x2"})
    throw ScenarioError("graph height must be declared over {x1, x2}");
  Manifold m;
  m.dim_ = 2;
  m.flat_ = false;
  m.fd_step_ = fd_step;
  m.height_ = height;
  m.dh_[0] = height.differentiate(0);
  m.dh_[1] = height.differentiate(1);
  m.d2h_[0] = m.dh_[0]->differentiate(0);  // a_x1x1
  m.d2h_[1] = m.dh_[0]->differentiate(1);  // a_x1x2
  m.d2h_[2] = m.dh_[1]->differentiate(1);  // a_x2x2
  return m;
}

Manifold Manifold::graph(const std::string& height_text, double fd_step) {
  return graph(expr::parse(height_text, {"x1", "x2"}), fd_step);
}

Manifold::Metric Manifold::metric_at(const Vec& q) const {
  Metric m;
  if (flat_) {
    m.g = Mat::Identity(dim_, dim_);
    m.g_inv = m.g;
    m.g_sqrt = m.g;
    return m;
  }
  std::array<double, 2> qa{q[0], q[1]};
  double a1 = dh_[0]->eval(qa);
  double a2 = dh_[1]->eval(qa);
  if (!std::isfinite(a1) || !std::isfinite(a2))
    throw NumericError("non-finite height derivatives");
  m.g = Mat(2, 2);
  m.g << 1.0 + a1 * a1, a1 * a2, a1 * a2, 1.0 + a2 * a2;
  double det = 1.0 + a1 * a1 + a2 * a2;
  m.g_inv = Mat(2, 2);
  m.g_inv << (1.0 + a2 * a2) / det, -a1 * a2 / det, -a1 * a2 / det, (1.0 + a1 * a1) / det;
  Eigen::SelfAdjointEigenSolver<Mat> es(m.g);
  m.g_sqrt = es.operatorSqrt();
  return m;
}

std::vector<Mat> Manifold::christoffel_at(const Vec& q) const {
  std::vector<Mat> gamma(static_cast<std::size_t>(dim_), Mat::Zero(dim_, dim_));
  if (flat_) return gamma;
  std::array<double, 2> qa{q[0], q[1]};
  double a1 = dh_[0]->eval(qa);
  double a2 = dh_[1]->eval(qa);
  double a11 = d2h_[0]->eval(qa);
  double a12 = d2h_[1]->eval(qa);
  double a22 = d2h_[2]->eval(qa);
  double w = 1.0 + a1 * a1 + a2 * a2;
  // Γ^k_{ij} = a_{x_i x_j} a_{x_k} / (1 + |∇a|^2)
  Mat hess(2, 2);
  hess << a11, a12, a12, a22;
  gamma[0] = hess * (a1 / w);
  gamma[1] = hess * (a2 / w);
  return gamma;
}

std::vector<std::vector<Mat>> Manifold::christoffel_grad_at(const Vec& q) const {
  std::vector<std::vector<Mat>> grad(
      static_cast<std::size_t>(dim_),
      std::vector<Mat>(static_cast<std::size_t>(dim_), Mat::Zero(dim_, dim_)));
  if (flat_) return grad;
  for (int m = 0; m < dim_; ++m) {
    Vec qp = q, qm = q;
    qp[m] += fd_step_;
    qm[m] -= fd_step_;
    auto gp = christoffel_at(qp);
    auto gm = christoffel_at(qm);
    for (int k = 0; k < dim_; ++k)
      grad[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] =
          (gp[static_cast<std::size_t>(k)] - gm[static_cast<std::size_t>(k)]) / (2.0 * fd_step_);
  }
  return grad;
}

double Manifold::sectional_curvature_at(const Vec& q) const {
  if (flat_) return 0.0;
  std::array<double, 2> qa{q[0], q[1]};
  double a1 = dh_[0]->eval(qa);
  double a2 = dh_[1]->eval(qa);
  double a11 = d2h_[0]->eval(qa);
  double a12 = d2h_[1]->eval(qa);
  double a22 = d2h_[2]->eval(qa);
  double w = 1.0 + a1 * a1 + a2 * a2;
  return (a11 * a22 - a12 * a12) / (w * w);
}

double Manifold::height_at(const Vec& q) const {
  if (flat_) return 0.0;
  std::array<double, 2> qa{q[0], q[1]};
  return height_->eval(qa);
}

double norm_tangent_at(const Manifold& M, const Vec& q, const Vec& X) {
  if (M.is_flat()) return X.norm();
  auto m = M.metric_at(q);
  return std::sqrt(X.dot(m.g * X));
}

double norm_cotangent_at(const Manifold& M, const Vec& q, const Vec& eta) {
  if (M.is_flat()) return eta.norm();
  auto m = M.metric_at(q);
  return std::sqrt(eta.dot(m.g_inv * eta));
}

double metric_pair_at(const Manifold& M, const Vec& q, const Vec& X, const Vec& Y) {
  if (M.is_flat()) return X.dot(Y);
  auto m = M.metric_at(q);
  return X.dot(m.g * Y);
}

double duality_pair(const Vec& eta, const Vec& X) { return eta.dot(X); }

double curvature_term(const Manifold& M, const Vec& q, const Vec& eta, const Vec& X,
                      const Vec& f) {
  if (M.is_flat()) return 0.0;
  double K = M.sectional_curvature_at(q);
  auto m = M.metric_at(q);
  double eta_f = eta.dot(f);
  double eta_X = eta.dot(X);
  double XX = X.dot(m.g * X);
  double fX = f.dot(m.g * X);
  return -K * (eta_f * XX - eta_X * fX);
}

std::vector<Vec> parallel_transport(const Manifold& M, const GridCurve& curve, const Vec& V0,
                                    TransportKind kind) {
  std::size_t count = curve.size();
  std::vector<Vec> field(count);
  field[0] = V0;
  if (M.is_flat()) {
    for (std::size_t k = 1; k < count; ++k) field[k] = V0;
    return field;
  }
  double h = curve.dt();
  auto rhs = [&](double t, const Vec& V) -> Vec {
    Mat A = transport_matrix(M, curve.position(t), curve.velocity(t));
    return kind == TransportKind::Vector ? Vec(-A * V) : Vec(A.transpose() * V);
  };
  for (std::size_t k = 1; k < count; ++k) {
    double t = curve.fn.time_at(k - 1);
    field[k] = rk4_step(rhs, t, field[k - 1], h);
  }
  return field;
}

Mat ParallelFrame::basis_at(double t) const {
  GridFn f;
  f.t0 = t0;
  f.dt = dt;
  // Matrices flattened column-wise into vectors for Hermite evaluation.
  std::size_t count = basis.size();
  int n = static_cast<int>(basis[0].rows());
  f.values.reserve(count);
  f.derivs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    f.values.push_back(Eigen::Map<const Vec>(basis[k].data(), n * n));
    f.derivs.push_back(Eigen::Map<const Vec>(basis_dot[k].data(), n * n));
  }
  Vec v = f.at(t);
  return Eigen::Map<const Mat>(v.data(), n, n);
}

Mat ParallelFrame::dual_at(double t) const {
  GridFn f;
  f.t0 = t0;
  f.dt = dt;
  std::size_t count = dual.size();
  int n = static_cast<int>(dual[0].rows());
  f.values.reserve(count);
  f.derivs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    f.values.push_back(Eigen::Map<const Vec>(dual[k].data(), n * n));
    f.derivs.push_back(Eigen::Map<const Vec>(dual_dot[k].data(), n * n));
  }
  Vec v = f.at(t);
  return Eigen::Map<const Mat>(v.data(), n, n);
}

double ParallelFrame::gram_defect(const Manifold& M, const GridCurve& curve) const {
  double worst = 0.0;
  int n = M.dim();
  for (std::size_t k = 0; k < basis.size(); ++k) {
    auto m = M.metric_at(curve.fn.values[k]);
    Mat gram = basis[k].transpose() * m.g * basis[k];
    worst = std::max(worst, (gram - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  return worst;
}

double ParallelFrame::duality_defect() const {
  double worst = 0.0;
  int n = static_cast<int>(basis[0].rows());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    Mat prod = dual[k] * basis[k];
    worst = std::max(worst, (prod - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
  }
  return worst;
}

ParallelFrame build_parallel_frame(const Manifold& M, const GridCurve& curve) {
  int n = M.dim();
  std::size_t count = curve.size();
  ParallelFrame frame;
  frame.t0 = curve.fn.t0;
  frame.dt = curve.fn.dt;
  frame.basis.resize(count);
  frame.dual.resize(count);
  frame.basis_dot.resize(count);
  frame.dual_dot.resize(count);

  // Gram-Schmidt of the chart basis against G at the initial point.
  const Vec& q0 = curve.fn.values[0];
  Mat g0 = M.metric_at(q0).g;
  Mat E0 = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    Vec v = Vec::Unit(n, i);
    for (int l = 0; l < n; ++l) v -= E0.col(l) * (E0.col(l).dot(g0 * v));
    double len = std::sqrt(v.dot(g0 * v));
    if (len <= 0.0) throw NumericError("degenerate metric in frame construction");
    E0.col(i) = v / len;
  }
  frame.basis[0] = E0;
  frame.dual[0] = E0.inverse();

  if (M.is_flat()) {
    for (std::size_t k = 0; k < count; ++k) {
      frame.basis[k] = E0;
      frame.dual[k] = frame.dual[0];
      frame.basis_dot[k] = Mat::Zero(n, n);
      frame.dual_dot[k] = Mat::Zero(n, n);
    }
    return frame;
  }

  // Joint matrix transport: Edot = -A E, Ddot = D A.
  double h = curve.dt();
  auto pack = [n](const Mat& E, const Mat& D) {
    Vec y(2 * n * n);
    y.head(n * n) = Eigen::Map<const Vec>(E.data(), n * n);
    y.tail(n * n) = Eigen::Map<const Vec>(D.data(), n * n);
    return y;
  };
  auto rhs = [&](double t, const Vec& y) -> Vec {
    Mat A = transport_matrix(M, curve.position(t), curve.velocity(t));
    Mat E = Eigen::Map<const Mat>(y.data(), n, n);
    Mat D = Eigen::Map<const Mat>(y.data() + n * n, n, n);
    Mat Ed = -A * E;
    Mat Dd = D * A;
    return pack(Ed, Dd);
  };
  Vec y = pack(frame.basis[0], frame.dual[0]);
  for (std::size_t k = 0;; ++k) {
    Mat E = Eigen::Map<const Mat>(y.data(), n, n);
    Mat D = Eigen::Map<const Mat>(y.data() + n * n, n, n);
    frame.basis[k] = E;
    frame.dual[k] = D;
    Mat A = transport_matrix(M, curve.fn.values[k], curve.fn.derivs[k]);
    frame.basis_dot[k] = -A * E;
    frame.dual_dot[k] = D * A;
    if (k + 1 == count) break;
    y = rk4_step(rhs, curve.fn.time_at(k), y, h);
  }
  return frame;
}

Vec geodesic_shoot(const Manifold& M, const Vec& q, const Vec& V, double t, int steps,
                   GridCurve& curve_out) {
  int n = M.dim();
  curve_out.fn.t0 = 0.0;
  curve_out.fn.dt = t / steps;
  curve_out.fn.values.assign(static_cast<std::size_t>(steps) + 1, Vec());
  curve_out.fn.derivs.assign(static_cast<std::size_t>(steps) + 1, Vec());
  if (M.is_flat()) {
    for (int k = 0; k <= steps; ++k) {
      double s = t * k / steps;
      curve_out.fn.values[static_cast<std::size_t>(k)] = q + s * V;
      curve_out.fn.derivs[static_cast<std::size_t>(k)] = V;
    }
    return q + t * V;
  }
  auto rhs = [&](double, const Vec& y) -> Vec {
    Vec pos = y.head(n);
    Vec vel = y.tail(n);
    auto gamma = M.christoffel_at(pos);
    Vec acc(n);
    for (int k = 0; k < n; ++k)
      acc[k] = -vel.dot(gamma[static_cast<std::size_t>(k)] * vel);
    Vec dy(2 * n);
    dy.head(n) = vel;
    dy.tail(n) = acc;
    return dy;
  };
  Vec y(2 * n);
  y.head(n) = q;
  y.tail(n) = V;
  double h = t / steps;
  curve_out.fn.values[0] = q;
  curve_out.fn.derivs[0] = V;
  for (int k = 1; k <= steps; ++k) {
    y = rk4_step(rhs, h * (k - 1), y, h);
    if (!y.allFinite()) throw NumericError("geodesic integration blew up");
    curve_out.fn.values[static_cast<std::size_t>(k)] = y.head(n);
    curve_out.fn.derivs[static_cast<std::size_t>(k)] = y.tail(n);
  }
  return y.head(n);
}

Vec geodesic_shoot(const Manifold& M, const Vec& q, const Vec& V, double t, int steps) {
  GridCurve scratch;
  return geodesic_shoot(M, q, V, t, steps, scratch);
}

Vec log_map(const Manifold& M, const Vec& q, const Vec& q2, int steps) {
  if (M.is_flat()) return q2 - q;
  int n = M.dim();
  Vec V = q2 - q;  // chart difference as initial guess
  for (int iter = 0; iter < kLogMapMaxIter; ++iter) {
    Vec F = geodesic_shoot(M, q, V, 1.0, steps) - q2;
    if (F.cwiseAbs().maxCoeff() <= kLogMapTol) return V;
    // Finite-difference Jacobian of the shooting map.
    Mat J(n, n);
    double step = 1e-7 * (1.0 + V.norm());
    for (int c = 0; c < n; ++c) {
      Vec Vp = V, Vm = V;
      Vp[c] += step;
      Vm[c] -= step;
      J.col(c) =
          (geodesic_shoot(M, q, Vp, 1.0, steps) - geodesic_shoot(M, q, Vm, 1.0, steps)) /
          (2.0 * step);
    }
    V -= J.fullPivLu().solve(F);
    if (!V.allFinite()) throw NumericError("log_map Newton iteration diverged");
  }
  throw NumericError("log_map did not converge in 50 iterations (points too far apart)");
}

double covariant_hessian_scalar(const Manifold& M, const expr::Expr& zeta, const Vec& q,
                                const Vec& X, const Vec& Y) {
  int n = M.dim();
  std::vector<double> b(q.data(), q.data() + n);
  Vec grad(n);
  Mat hess(n, n);
  for (int i = 0; i < n; ++i) {
    expr::Expr di = zeta.differentiate(i);
    grad[i] = di.eval(b);
    for (int l = i; l < n; ++l) hess(i, l) = hess(l, i) = di.differentiate(l).eval(b);
  }
  auto gamma = M.christoffel_at(q);
  for (int eta = 0; eta < n; ++eta) hess -= grad[eta] * gamma[static_cast<std::size_t>(eta)];
  return X.dot(hess * Y);
}

}  // namespace riemoc::geom
