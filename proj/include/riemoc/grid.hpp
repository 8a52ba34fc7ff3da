#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "riemoc/errors.hpp"

namespace riemoc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Vector-valued function sampled on a uniform grid, with node derivatives
/// for cubic-Hermite evaluation between nodes. Without derivatives the
/// evaluation falls back to linear interpolation.
struct GridFn {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Vec> values;
  std::vector<Vec> derivs;  // same length as values, or empty

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  double t_end() const { return time_at(values.size() - 1); }

  // Interval index and local parameter for t, clamped to the grid.
  void locate(double t, std::size_t& k, double& theta) const {
    double s = (t - t0) / dt;
    if (s <= 0.0) {
      k = 0;
      theta = 0.0;
      return;
    }
    auto last = values.size() - 1;
    if (s >= static_cast<double>(last)) {
      k = last - 1;
      theta = 1.0;
      return;
    }
    k = static_cast<std::size_t>(s);
    theta = s - static_cast<double>(k);
  }

  Vec at(double t) const {
    if (values.size() == 1) return values[0];
    std::size_t k;
    double theta;
    locate(t, k, theta);
    if (theta == 0.0) return values[k];
    if (theta == 1.0) return values[k + 1];
    if (derivs.empty()) return (1.0 - theta) * values[k] + theta * values[k + 1];
    // Cubic Hermite on [t_k, t_{k+1}]
    double h00 = (1 + 2 * theta) * (1 - theta) * (1 - theta);
    double h10 = theta * (1 - theta) * (1 - theta);
    double h01 = theta * theta * (3 - 2 * theta);
    double h11 = theta * theta * (theta - 1);
    return h00 * values[k] + h10 * dt * derivs[k] + h01 * values[k + 1] +
           h11 * dt * derivs[k + 1];
  }

  Vec deriv_at(double t) const {
    if (values.size() == 1) return derivs.empty() ? Vec::Zero(values[0].size()) : derivs[0];
    std::size_t k;
    double theta;
    locate(t, k, theta);
    if (derivs.empty()) return (values[k + 1] - values[k]) / dt;
    if (theta == 0.0) return derivs[k];
    if (theta == 1.0) return derivs[k + 1];
    double g00 = 6 * theta * (theta - 1) / dt;
    double g10 = (1 - theta) * (1 - 3 * theta);
    double g01 = -g00;
    double g11 = theta * (3 * theta - 2);
    return g00 * values[k] + g10 * derivs[k] + g01 * values[k + 1] + g11 * derivs[k + 1];
  }
};

/// Composite Simpson weights applied to node samples; size must be odd
/// (even interval count).
inline double simpson(const std::vector<double>& samples, double dt) {
  std::size_t n = samples.size();
  if (n < 3 || n % 2 == 0) throw NumericError("Simpson rule needs an even interval count");
  double s = samples.front() + samples.back();
  for (std::size_t k = 1; k + 1 < n; ++k) s += samples[k] * (k % 2 == 1 ? 4.0 : 2.0);
  return s * dt / 3.0;
}

/// Simpson quadrature weight of node k on a grid with N = size-1 intervals.
inline double simpson_weight(std::size_t k, std::size_t size, double dt) {
  if (k == 0 || k + 1 == size) return dt / 3.0;
  return (k % 2 == 1 ? 4.0 : 2.0) * dt / 3.0;
}

/// Classic fixed-step RK4 update for dy/dt = rhs(t, y).
template <class Rhs>
Vec rk4_step(Rhs&& rhs, double t, const Vec& y, double h) {
  Vec k1 = rhs(t, y);
  Vec k2 = rhs(t + 0.5 * h, Vec(y + 0.5 * h * k1));
  Vec k3 = rhs(t + 0.5 * h, Vec(y + 0.5 * h * k2));
  Vec k4 = rhs(t + h, Vec(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace riemoc
