#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "riemoc/conditions.hpp"
#include "riemoc/cones.hpp"
#include "riemoc/dynamics.hpp"
#include "riemoc/geometry.hpp"

namespace riemoc::cli {

using json = nlohmann::ordered_json;

/// Control-shaped input: one constant vector, expression strings in t, or
/// explicit uniform samples over the horizon.
struct ControlSpec {
  enum class Kind { Constant, Exprs, Samples };
  Kind kind = Kind::Constant;
  Vec constant;
  std::vector<std::string> exprs;
  std::vector<Vec> samples;

  int dim() const;
  /// Realize as a Signal over [0, T]; grid_count is the trajectory node count.
  dyn::Signal realize(double T, std::size_t grid_count) const;
  json to_json() const;
  static ControlSpec from_json(const json& j, const std::string& where);
};

struct SingularSpec {
  ControlSpec v;
  std::optional<ControlSpec> xi;     // free-horizon time dilation, scalar
  Vec X0;                            // initial variation, defaults to 0
  std::optional<ControlSpec> sigma;  // second-order control correction
};

struct NumericsConfig {
  int steps = 0;  // 0 resolves to 2000 per unit horizon, rounded up to even
  double fd_step = 1e-5;
  int geodesic_steps = 256;
  int samples = 10000;
  std::uint64_t seed = 1;
  cond::Tolerances tol;
};

/// Fully validated problem statement: manifold, dynamics, control set,
/// horizon, endpoint maps, candidate, and the singular direction to test.
struct Scenario {
  std::string name;
  bool flat_manifold = true;
  int n = 1;                // chart dimension
  std::string height;       // graph manifolds
  int m = 1;                // control dimension
  std::vector<std::string> f;
  cones::ConvexSet control_set;
  dyn::Horizon horizon = dyn::Horizon::Fixed;
  double T = 1.0;
  std::vector<std::string> phi0, phi, psi;
  Vec x0;
  ControlSpec candidate;
  std::optional<SingularSpec> singular;
  NumericsConfig numerics;

  geom::Manifold manifold() const;
  dyn::ControlSystem system() const;
  cond::EndpointData endpoints() const;
  int grid_steps() const;

  json to_json() const;
};

Scenario scenario_from_json(const json& j);
Scenario load_scenario(const std::string& path);

/// The built-in worked example on the 2-D graph manifold, parameterized by
/// the horizon length.
Scenario builtin_example(double T);

}  // namespace riemoc::cli
