#include <doctest.h>

#include <cmath>

#include "riemoc/geometry.hpp"
#include "riemoc/rng.hpp"

using riemoc::DetRng;
using riemoc::Mat;
using riemoc::Vec;
namespace gm = riemoc::geom;

namespace {

gm::Manifold example_manifold() { return gm::Manifold::graph("ln(1+x1^2+x2^2)"); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Straight-line chart curve (0, -t) on [0, T]; the Example candidate path.
gm::GridCurve axis_curve(double T, int N) {
  gm::GridCurve c;
  c.fn.t0 = 0.0;
  c.fn.dt = T / N;
  for (int k = 0; k <= N; ++k) {
    c.fn.values.push_back(v2(0.0, -T * k / N));
    c.fn.derivs.push_back(v2(0.0, -1.0));
  }
  return c;
}

// Independent Gauss-curvature oracle: Brioschi formula evaluated with
// central finite differences of the metric components.
double brioschi_fd(const gm::Manifold& M, const Vec& q, double h = 1e-4) {
  auto E = [&](double u, double v) { return M.metric_at(v2(u, v)).g(0, 0); };
  auto F = [&](double u, double v) { return M.metric_at(v2(u, v)).g(0, 1); };
  auto G = [&](double u, double v) { return M.metric_at(v2(u, v)).g(1, 1); };
  double u = q[0], v = q[1];
  auto du = [&](auto f, double uu, double vv) { return (f(uu + h, vv) - f(uu - h, vv)) / (2 * h); };
  auto dv = [&](auto f, double uu, double vv) { return (f(uu, vv + h) - f(uu, vv - h)) / (2 * h); };
  double Eu = du(E, u, v), Ev = dv(E, u, v);
  double Fu = du(F, u, v), Fv = dv(F, u, v);
  double Gu = du(G, u, v), Gv = dv(G, u, v);
  double Evv = (E(u, v + h) - 2 * E(u, v) + E(u, v - h)) / (h * h);
  double Guu = (G(u + h, v) - 2 * G(u, v) + G(u - h, v)) / (h * h);
  double Fuv =
      (F(u + h, v + h) - F(u + h, v - h) - F(u - h, v + h) + F(u - h, v - h)) / (4 * h * h);
  Mat A(3, 3), B(3, 3);
  A << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev, Fv - 0.5 * Gu, E(u, v), F(u, v),
      0.5 * Gv, F(u, v), G(u, v);
  B << 0.0, 0.5 * Ev, 0.5 * Gu, 0.5 * Ev, E(u, v), F(u, v), 0.5 * Gu, F(u, v), G(u, v);
  double denom = E(u, v) * G(u, v) - F(u, v) * F(u, v);
  return (A.determinant() - B.determinant()) / (denom * denom);
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("metric closed forms") {
  auto M = example_manifold();
  auto m0 = M.metric_at(v2(0, 0));
  CHECK((m0.g - Mat::Identity(2, 2)).norm() == doctest::Approx(0.0).epsilon(1e-14));

  auto m1 = M.metric_at(v2(0, -1));
  CHECK(m1.g(0, 0) == doctest::Approx(1.0));
  CHECK(m1.g(1, 1) == doctest::Approx(2.0));
  CHECK(m1.g(0, 1) == doctest::Approx(0.0));
  CHECK((m1.g_inv * m1.g - Mat::Identity(2, 2)).norm() < 1e-12);
  CHECK((m1.g_sqrt * m1.g_sqrt - m1.g).norm() < 1e-12);

  DetRng rng(5);
  for (int i = 0; i < 20; ++i) {
    Vec q = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    auto m = M.metric_at(q);
    double r2 = q.squaredNorm();
    double lam1 = 1.0 + 4.0 * r2 / ((1.0 + r2) * (1.0 + r2));
    Eigen::SelfAdjointEigenSolver<Mat> es(m.g);
    CHECK(es.eigenvalues()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(es.eigenvalues()[1] == doctest::Approx(lam1).epsilon(1e-12));
    // det G = 1 + |grad a|^2
    CHECK(m.g.determinant() == doctest::Approx(1.0 + 4.0 * r2 / ((1 + r2) * (1 + r2)))
                                   .epsilon(1e-12));
  }
}

TEST_CASE("christoffel symbols") {
  auto M = example_manifold();
  auto flat = gm::Manifold::flat(3);

  auto g0 = M.christoffel_at(v2(0, 0));
  CHECK(g0[0].norm() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(g0[1].norm() == doctest::Approx(0.0).epsilon(1e-14));

  // at (0,-1) the only nonzero symbol is Γ²₁₁ = -1/2
  auto g1 = M.christoffel_at(v2(0, -1));
  CHECK(g1[1](0, 0) == doctest::Approx(-0.5).epsilon(1e-13));
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (!(k == 1 && i == 0 && j == 0))
          CHECK(std::abs(g1[static_cast<std::size_t>(k)](i, j)) <= 1e-14);

  Vec q3(3);
  q3 << 1, 2, 3;
  auto gf = flat.christoffel_at(q3);
  for (const auto& g : gf) CHECK(g.norm() == 0.0);

  DetRng rng(6);
  for (int i = 0; i < 10; ++i) {
    Vec q = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    auto g = M.christoffel_at(q);
    CHECK(g[0](0, 1) == g[0](1, 0));
    CHECK(g[1](0, 1) == g[1](1, 0));
  }
}

TEST_CASE("christoffel gradients by finite differences") {
  auto flat = gm::Manifold::flat(2);
  auto dflat = flat.christoffel_grad_at(v2(0.3, 0.4));
  for (const auto& per_dir : dflat)
    for (const auto& m : per_dir) CHECK(m.norm() == 0.0);

  auto M = example_manifold();
  auto dg = M.christoffel_grad_at(v2(0, 0));
  // d(Γ²₁₁)/dx2 at the origin: a11 = 2 and a2' = 2 there, all else first order.
  CHECK(dg[1][1](0, 0) == doctest::Approx(4.0).epsilon(1e-6));
  // index symmetry in the lower pair survives differentiation
  DetRng rng(8);
  for (int i = 0; i < 5; ++i) {
    Vec q = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto d = M.christoffel_grad_at(q);
    for (int m = 0; m < 2; ++m)
      for (int k = 0; k < 2; ++k) CHECK(d[m][k](0, 1) == doctest::Approx(d[m][k](1, 0)));
  }
}

TEST_CASE("sectional curvature closed form and FD oracle") {
  auto M = example_manifold();
  CHECK(M.sectional_curvature_at(v2(0, 0)) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(M.sectional_curvature_at(v2(0, -1)) == doctest::Approx(0.0).epsilon(1e-13));
  for (double t : {0.0, 0.5, 1.0, 2.0}) {
    double expect = 4.0 * (1 - std::pow(t, 4)) /
                    std::pow(1 + 6 * t * t + std::pow(t, 4), 2);
    CHECK(M.sectional_curvature_at(v2(0, -t)) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(gm::Manifold::flat(5).sectional_curvature_at(Vec::Zero(5)) == 0.0);

  DetRng rng(9);
  for (int i = 0; i < 10; ++i) {
    Vec q = v2(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    CHECK(std::abs(M.sectional_curvature_at(q) - brioschi_fd(M, q)) < 1e-4);
  }
}

TEST_CASE("norms and pairings") {
  auto M = example_manifold();
  auto flat = gm::Manifold::flat(2);
  CHECK(gm::norm_tangent_at(flat, v2(0, 0), v2(3, 4)) == doctest::Approx(5.0));
  CHECK(gm::norm_cotangent_at(flat, v2(0, 0), v2(3, 4)) == doctest::Approx(5.0));

  CHECK(gm::norm_tangent_at(M, v2(0, -1), v2(0, 1)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(gm::norm_cotangent_at(M, v2(0, -1), v2(0, 1)) ==
        doctest::Approx(1.0 / std::sqrt(2.0)));

  // g(X,X) = |X|^2
  DetRng rng(10);
  for (int i = 0; i < 10; ++i) {
    Vec q = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Vec X = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    double n = gm::norm_tangent_at(M, q, X);
    CHECK(gm::metric_pair_at(M, q, X, X) == doctest::Approx(n * n).epsilon(1e-12));
  }

  CHECK(gm::duality_pair(v2(0, 2.5), v2(1.7, 0)) == 0.0);
  for (double t : {0.25, 1.0, 1.75})
    CHECK(gm::metric_pair_at(M, v2(0, -t), v2(0, -1), v2(1, 0)) ==
          doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("curvature term identity") {
  auto M = example_manifold();
  Vec q = v2(0, -0.5);
  Vec X = v2(0.7, 0);
  Vec f = v2(0, -1);
  CHECK(gm::curvature_term(M, q, v2(0, 0), X, f) == 0.0);
  // X = f: antisymmetry kills the bracket
  CHECK(gm::curvature_term(M, q, v2(0.3, -0.8), f, f) == doctest::Approx(0.0).epsilon(1e-14));
  for (double t : {0.3, 0.8, 1.6}) {
    double p2 = -1.25;
    double K = M.sectional_curvature_at(v2(0, -t));
    double expect = K * p2 * X[0] * X[0];
    CHECK(gm::curvature_term(M, v2(0, -t), v2(0, p2), X, f) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  auto flat = gm::Manifold::flat(2);
  CHECK(gm::curvature_term(flat, q, v2(1, 1), X, f) == 0.0);
}

TEST_CASE("parallel transport preserves norms and duality") {
  auto flat = gm::Manifold::flat(2);
  auto curve_flat = axis_curve(1.0, 100);
  auto field = gm::parallel_transport(flat, curve_flat, v2(0.6, -0.2),
                                      gm::TransportKind::Vector);
  for (const auto& v : field) CHECK((v - v2(0.6, -0.2)).norm() == 0.0);

  auto M = example_manifold();
  auto curve = axis_curve(1.0, 2000);
  Vec V0 = v2(1.0, 0.5);
  auto tv = gm::parallel_transport(M, curve, V0, gm::TransportKind::Vector);
  double n0 = gm::norm_tangent_at(M, curve.fn.values.front(), V0);
  double drift = 0.0;
  for (std::size_t k = 0; k < tv.size(); ++k)
    drift = std::max(drift,
                     std::abs(gm::norm_tangent_at(M, curve.fn.values[k], tv[k]) - n0));
  CHECK(drift <= 1e-9);

  Vec d0 = v2(0.4, -1.1);
  auto td = gm::parallel_transport(M, curve, d0, gm::TransportKind::Covector);
  double pairing0 = d0.dot(V0);
  for (std::size_t k = 0; k < tv.size(); ++k)
    CHECK(td[k].dot(tv[k]) == doctest::Approx(pairing0).epsilon(1e-9));

  // metric pairing of two transported vectors is conserved as well
  Vec W0 = v2(-0.8, 0.3);
  auto tw = gm::parallel_transport(M, curve, W0, gm::TransportKind::Vector);
  double g0 = gm::metric_pair_at(M, curve.fn.values.front(), V0, W0);
  for (std::size_t k = 0; k < tv.size(); k += 40)
    CHECK(gm::metric_pair_at(M, curve.fn.values[k], tv[k], tw[k]) ==
          doctest::Approx(g0).epsilon(1e-9));
}

TEST_CASE("transport along a curving path stays isometric") {
  auto M = example_manifold();
  gm::GridCurve curve;
  int N = 2000;
  curve.fn.t0 = 0.0;
  curve.fn.dt = 1.0 / N;
  for (int k = 0; k <= N; ++k) {
    double t = static_cast<double>(k) / N;
    curve.fn.values.push_back(v2(std::sin(t), t * t - 0.5));
    curve.fn.derivs.push_back(v2(std::cos(t), 2 * t));
  }
  Vec V0 = v2(-0.3, 0.9);
  auto tv = gm::parallel_transport(M, curve, V0, gm::TransportKind::Vector);
  double n0 = gm::norm_tangent_at(M, curve.fn.values.front(), V0);
  for (std::size_t k = 0; k < tv.size(); k += 100)
    CHECK(gm::norm_tangent_at(M, curve.fn.values[k], tv[k]) ==
          doctest::Approx(n0).epsilon(1e-9));
}

TEST_CASE("parallel frame invariants") {
  auto flat = gm::Manifold::flat(2);
  auto curve_flat = axis_curve(1.0, 50);
  auto frame_flat = gm::build_parallel_frame(flat, curve_flat);
  CHECK((frame_flat.basis.back() - Mat::Identity(2, 2)).norm() == 0.0);

  auto M = example_manifold();
  auto curve = axis_curve(1.0, 2000);
  auto frame = gm::build_parallel_frame(M, curve);
  CHECK(frame.gram_defect(M, curve) <= 1e-9);
  CHECK(frame.duality_defect() <= 1e-9);
  // Frame interpolation stays close to node values
  Mat mid = frame.basis_at(0.5 + 0.25 * curve.fn.dt);
  CHECK((mid - frame.basis[1000]).norm() < 1e-3);
}

TEST_CASE("geodesics and the log map") {
  auto flat = gm::Manifold::flat(3);
  Vec q(3), V(3);
  q << 1, 2, 3;
  V << -1, 0.5, 0.25;
  CHECK((gm::geodesic_shoot(flat, q, V, 2.0) - (q + 2.0 * V)).norm() == 0.0);
  CHECK((gm::log_map(flat, q, q + V) - V).norm() == 0.0);

  auto M = example_manifold();
  Vec q0 = v2(0.1, -0.2);
  Vec V0 = v2(0.4, 0.3);
  gm::GridCurve curve;
  Vec q1 = gm::geodesic_shoot(M, q0, V0, 1.0, 256, curve);
  double speed0 = gm::norm_tangent_at(M, q0, V0);
  for (std::size_t k = 0; k < curve.fn.values.size(); k += 16)
    CHECK(gm::norm_tangent_at(M, curve.fn.values[k], curve.fn.derivs[k]) ==
          doctest::Approx(speed0).epsilon(1e-9));

  Vec Vrec = gm::log_map(M, q0, q1);
  CHECK((Vrec - V0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("covariant hessian of scalars") {
  auto flat = gm::Manifold::flat(2);
  auto zeta = riemoc::expr::parse("x1^2", {"x1", "x2"});
  Vec X = v2(1.5, 0.2);
  CHECK(gm::covariant_hessian_scalar(flat, zeta, v2(0.3, 0.7), X, X) ==
        doctest::Approx(2.0 * X[0] * X[0]));

  auto M = example_manifold();
  auto a = riemoc::expr::parse("ln(1+x1^2+x2^2)", {"x1", "x2"});
  for (double T : {0.5, 1.0, 2.0}) {
    double coeff = 2.0 * (1 + T * T) / (1 + 6 * T * T + T * T * T * T);
    Vec X1 = v2(1.0, 0.0);
    CHECK(gm::covariant_hessian_scalar(M, a, v2(0, -T), X1, X1) ==
          doctest::Approx(coeff).epsilon(1e-12));
  }

  auto x2fn = riemoc::expr::parse("x2", {"x1", "x2"});
  CHECK(gm::covariant_hessian_scalar(M, x2fn, v2(0, -1), v2(1, 0), v2(1, 0)) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

}  // TEST_SUITE
