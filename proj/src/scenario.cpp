#include "riemoc/scenario.hpp"

#include <cmath>
#include <fstream>

namespace riemoc::cli {

namespace {

Vec vec_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ScenarioError(where + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ScenarioError(where + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json vec_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ScenarioError(where + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ScenarioError(where + "/" + key + ": wrong type");
  }
}

}  // namespace

int ControlSpec::dim() const {
  switch (kind) {
    case Kind::Constant:
      return static_cast<int>(constant.size());
    case Kind::Exprs:
      return static_cast<int>(exprs.size());
    case Kind::Samples:
      return samples.empty() ? 0 : static_cast<int>(samples.front().size());
  }
  return 0;
}

dyn::Signal ControlSpec::realize(double T, std::size_t grid_count) const {
  switch (kind) {
    case Kind::Constant:
      return dyn::Signal::constant(constant, 0.0, T, 2);
    case Kind::Exprs:
      return dyn::Signal::from_exprs(exprs, 0.0, T / static_cast<double>(grid_count - 1),
                                     grid_count);
    case Kind::Samples: {
      if (samples.size() < 2) throw ScenarioError("sampled control needs at least 2 samples");
      double dt = T / static_cast<double>(samples.size() - 1);
      return dyn::Signal::from_samples(samples, 0.0, dt);
    }
  }
  throw ScenarioError("invalid control spec");
}

json ControlSpec::to_json() const {
  json j;
  switch (kind) {
    case Kind::Constant:
      j["kind"] = "constant";
      j["value"] = vec_to_json(constant);
      break;
    case Kind::Exprs:
      j["kind"] = "exprs";
      j["exprs"] = exprs;
      break;
    case Kind::Samples: {
      j["kind"] = "samples";
      json rows = json::array();
      for (const auto& s : samples) rows.push_back(vec_to_json(s));
      j["values"] = rows;
      break;
    }
  }
  return j;
}

ControlSpec ControlSpec::from_json(const json& j, const std::string& where) {
  ControlSpec spec;
  auto kind = require<std::string>(j, "kind", where);
  if (kind == "constant") {
    spec.kind = Kind::Constant;
    if (!j.contains("value")) throw ScenarioError(where + ": missing \"value\"");
    spec.constant = vec_from_json(j.at("value"), where + "/value");
  } else if (kind == "exprs") {
    spec.kind = Kind::Exprs;
    spec.exprs = require<std::vector<std::string>>(j, "exprs", where);
    for (const auto& text : spec.exprs) expr::parse(text, {"t"});
  } else if (kind == "samples") {
    spec.kind = Kind::Samples;
    if (!j.contains("values")) throw ScenarioError(where + ": missing \"values\"");
    for (const auto& row : j.at("values"))
      spec.samples.push_back(vec_from_json(row, where + "/values"));
  } else {
    throw ScenarioError(where + ": unknown control kind \"" + kind + "\"");
  }
  return spec;
}

geom::Manifold Scenario::manifold() const {
  if (flat_manifold) return geom::Manifold::flat(n);
  return geom::Manifold::graph(height, numerics.fd_step);
}

dyn::ControlSystem Scenario::system() const { return dyn::ControlSystem(n, m, f); }

cond::EndpointData Scenario::endpoints() const { return cond::EndpointData(n, phi0, phi, psi); }

int Scenario::grid_steps() const {
  if (numerics.steps > 0) return numerics.steps + (numerics.steps % 2);
  int N = static_cast<int>(std::lround(2000.0 * T));
  N = std::max(N, 100);
  return N + (N % 2);
}

json Scenario::to_json() const {
  json j;
  j["name"] = name;
  if (flat_manifold) {
    j["manifold"] = {{"kind", "flat"}, {"dim", n}};
  } else {
    j["manifold"] = {{"kind", "graph"}, {"height", height}};
  }
  j["dynamics"] = {{"n", n}, {"m", m}, {"f", f}};
  switch (control_set.kind) {
    case cones::ConvexSet::Kind::Ball:
      j["control_set"] = {{"kind", "ball"},
                          {"center", vec_to_json(control_set.center)},
                          {"radius", control_set.radius}};
      break;
    case cones::ConvexSet::Kind::Box:
      j["control_set"] = {{"kind", "box"},
                          {"lower", vec_to_json(control_set.lower)},
                          {"upper", vec_to_json(control_set.upper)}};
      break;
    case cones::ConvexSet::Kind::Polyhedron: {
      json rows = json::array();
      for (Eigen::Index r = 0; r < control_set.A.rows(); ++r)
        rows.push_back(vec_to_json(control_set.A.row(r).transpose()));
      j["control_set"] = {{"kind", "polyhedron"}, {"A", rows},
                          {"b", vec_to_json(control_set.b)}};
      break;
    }
  }
  j["horizon"] = {{"kind", horizon == dyn::Horizon::Fixed ? "fixed" : "free"}, {"T", T}};
  j["endpoints"] = {{"phi0", phi0}, {"phi", phi}, {"psi", psi}};
  j["candidate"] = {{"x0", vec_to_json(x0)}, {"control", candidate.to_json()}};
  if (singular) {
    json s;
    s["v"] = singular->v.to_json();
    if (singular->xi) s["xi"] = singular->xi->to_json();
    s["X0"] = vec_to_json(singular->X0);
    if (singular->sigma) s["sigma"] = singular->sigma->to_json();
    j["singular_direction"] = s;
  }
  j["numerics"] = {{"steps", grid_steps()},
                   {"fd_step", numerics.fd_step},
                   {"geodesic_steps", numerics.geodesic_steps},
                   {"samples", numerics.samples},
                   {"seed", numerics.seed},
                   {"tolerances",
                    {{"active", numerics.tol.active},
                     {"ia_prime", numerics.tol.ia_prime},
                     {"first_order", numerics.tol.first_order},
                     {"singular", numerics.tol.singular},
                     {"margin", numerics.tol.margin},
                     {"family_defect", numerics.tol.family_defect},
                     {"admissible", numerics.tol.admissible},
                     {"cone", numerics.tol.cone}}}};
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.name = j.value("name", "scenario");

  if (!j.contains("manifold")) throw ScenarioError("/manifold: missing");
  const json& man = j.at("manifold");
  auto mkind = require<std::string>(man, "kind", "/manifold");
  if (mkind == "flat") {
    s.flat_manifold = true;
    s.n = require<int>(man, "dim", "/manifold");
  } else if (mkind == "graph") {
    s.flat_manifold = false;
    s.n = 2;
    s.height = require<std::string>(man, "height", "/manifold");
    expr::parse(s.height, {"x1", "x2"});
  } else {
    throw ScenarioError("/manifold/kind: expected \"flat\" or \"graph\"");
  }

  if (!j.contains("dynamics")) throw ScenarioError("/dynamics: missing");
  const json& dynj = j.at("dynamics");
  int dn = require<int>(dynj, "n", "/dynamics");
  if (dn != s.n) throw ScenarioError("/dynamics/n: must match the manifold dimension");
  s.m = require<int>(dynj, "m", "/dynamics");
  s.f = require<std::vector<std::string>>(dynj, "f", "/dynamics");
  if (static_cast<int>(s.f.size()) != s.n)
    throw ScenarioError("/dynamics/f: expected " + std::to_string(s.n) + " components");

  if (!j.contains("control_set")) throw ScenarioError("/control_set: missing");
  const json& cs = j.at("control_set");
  auto ckind = require<std::string>(cs, "kind", "/control_set");
  if (ckind == "ball") {
    s.control_set = cones::ConvexSet::ball(vec_from_json(cs.at("center"), "/control_set/center"),
                                           require<double>(cs, "radius", "/control_set"));
  } else if (ckind == "box") {
    s.control_set = cones::ConvexSet::box(vec_from_json(cs.at("lower"), "/control_set/lower"),
                                          vec_from_json(cs.at("upper"), "/control_set/upper"));
  } else if (ckind == "polyhedron") {
    const json& rows = cs.at("A");
    Mat A(static_cast<Eigen::Index>(rows.size()), s.m);
    for (std::size_t r = 0; r < rows.size(); ++r)
      A.row(static_cast<Eigen::Index>(r)) =
          vec_from_json(rows[r], "/control_set/A").transpose();
    s.control_set = cones::ConvexSet::polyhedron(A, vec_from_json(cs.at("b"), "/control_set/b"));
  } else {
    throw ScenarioError("/control_set/kind: unknown kind \"" + ckind + "\"");
  }
  if (s.control_set.dim() != s.m)
    throw ScenarioError("/control_set: dimension must match /dynamics/m");

  if (!j.contains("horizon")) throw ScenarioError("/horizon: missing");
  const json& hz = j.at("horizon");
  auto hkind = require<std::string>(hz, "kind", "/horizon");
  if (hkind == "fixed")
    s.horizon = dyn::Horizon::Fixed;
  else if (hkind == "free")
    s.horizon = dyn::Horizon::Free;
  else
    throw ScenarioError("/horizon/kind: expected \"fixed\" or \"free\"");
  s.T = require<double>(hz, "T", "/horizon");
  if (s.T <= 0.0) throw ScenarioError("/horizon/T: must be positive");

  if (!j.contains("endpoints")) throw ScenarioError("/endpoints: missing");
  const json& epj = j.at("endpoints");
  s.phi0 = require<std::vector<std::string>>(epj, "phi0", "/endpoints");
  s.phi = epj.contains("phi") ? require<std::vector<std::string>>(epj, "phi", "/endpoints")
                              : std::vector<std::string>{};
  s.psi = epj.contains("psi") ? require<std::vector<std::string>>(epj, "psi", "/endpoints")
                              : std::vector<std::string>{};
  s.endpoints();  // validate expressions and variable sets  // NOLINT

  if (!j.contains("candidate")) throw ScenarioError("/candidate: missing");
  const json& cd = j.at("candidate");
  if (!cd.contains("x0")) throw ScenarioError("/candidate/x0: missing");
  s.x0 = vec_from_json(cd.at("x0"), "/candidate/x0");
  if (s.x0.size() != s.n) throw ScenarioError("/candidate/x0: dimension mismatch");
  if (!cd.contains("control")) throw ScenarioError("/candidate/control: missing");
  s.candidate = ControlSpec::from_json(cd.at("control"), "/candidate/control");
  if (s.candidate.dim() != s.m) throw ScenarioError("/candidate/control: dimension mismatch");

  if (j.contains("singular_direction")) {
    const json& sg = j.at("singular_direction");
    SingularSpec spec;
    if (!sg.contains("v")) throw ScenarioError("/singular_direction/v: missing");
    spec.v = ControlSpec::from_json(sg.at("v"), "/singular_direction/v");
    if (spec.v.dim() != s.m) throw ScenarioError("/singular_direction/v: dimension mismatch");
    if (sg.contains("xi")) {
      spec.xi = ControlSpec::from_json(sg.at("xi"), "/singular_direction/xi");
      if (spec.xi->dim() != 1)
        throw ScenarioError("/singular_direction/xi: must be scalar");
    }
    spec.X0 = sg.contains("X0") ? vec_from_json(sg.at("X0"), "/singular_direction/X0")
                                : Vec(Vec::Zero(s.n));
    if (spec.X0.size() != s.n) throw ScenarioError("/singular_direction/X0: dimension mismatch");
    if (sg.contains("sigma")) {
      spec.sigma = ControlSpec::from_json(sg.at("sigma"), "/singular_direction/sigma");
      if (spec.sigma->dim() != s.m)
        throw ScenarioError("/singular_direction/sigma: dimension mismatch");
    }
    s.singular = std::move(spec);
  }

  if (j.contains("numerics")) {
    const json& nm = j.at("numerics");
    s.numerics.steps = nm.value("steps", 0);
    s.numerics.fd_step = nm.value("fd_step", 1e-5);
    s.numerics.geodesic_steps = nm.value("geodesic_steps", 256);
    s.numerics.samples = nm.value("samples", 10000);
    s.numerics.seed = nm.value("seed", std::uint64_t{1});
    if (nm.contains("tolerances")) {
      const json& tl = nm.at("tolerances");
      s.numerics.tol.active = tl.value("active", 1e-8);
      s.numerics.tol.ia_prime = tl.value("ia_prime", 1e-7);
      s.numerics.tol.first_order = tl.value("first_order", 1e-7);
      s.numerics.tol.singular = tl.value("singular", 1e-7);
      s.numerics.tol.margin = tl.value("margin", 1e-6);
      s.numerics.tol.family_defect = tl.value("family_defect", 1e-7);
      s.numerics.tol.admissible = tl.value("admissible", 1e-7);
      s.numerics.tol.cone = tl.value("cone", 1e-9);
    }
  }

  // Cross-validation of the dynamics expressions under the declared dims.
  s.system();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("scenario JSON parse error: " + std::string(e.what()));
  }
  return scenario_from_json(j);
}

Scenario builtin_example(double T) {
  Scenario s;
  s.name = "example-exg";
  s.flat_manifold = false;
  s.n = 2;
  s.height = "ln(1+x1^2+x2^2)";
  s.m = 2;
  s.f = {"u2*ln(1+x1^2+x2^2)^2", "-x1^2+4*x1*u2-u1"};
  s.control_set = cones::ConvexSet::ball(Vec::Zero(2), 1.0);
  s.horizon = dyn::Horizon::Fixed;
  s.T = T;
  s.phi0 = {"-b1^2", "-ln(1+b1^2+b2^2)"};
  s.phi = {"a2"};
  s.psi = {"a1", "b1^3+b2+T"};
  s.x0 = Vec::Zero(2);
  s.candidate.kind = ControlSpec::Kind::Constant;
  s.candidate.constant = Vec(2);
  s.candidate.constant << 1.0, 0.0;
  SingularSpec sg;
  sg.v.kind = ControlSpec::Kind::Constant;
  sg.v.constant = Vec(2);
  sg.v.constant << 0.0, 1.0;
  sg.X0 = Vec::Zero(2);
  ControlSpec sigma;
  sigma.kind = ControlSpec::Kind::Constant;
  sigma.constant = Vec(2);
  sigma.constant << -0.5, 0.0;
  sg.sigma = sigma;
  s.singular = sg;
  return s;
}

}  // namespace riemoc::cli
