#pragma once

#include <optional>
#include <string>

#include "riemoc/report.hpp"
#include "riemoc/scenario.hpp"

namespace riemoc::cli {

struct RunOptions {
  std::string command;
  std::string scenario_path;  // one of scenario_path / builtin must be set
  std::string builtin;
  std::optional<double> T_override;
  std::optional<int> steps_override;
  std::optional<int> samples_override;
  std::optional<double> margin_override;
  std::optional<double> tol_override;  // singular/first-order tolerance
  std::vector<double> probe_point;     // geometry-probe
};

/// Resolve the scenario named by the options (file or builtin), applying
/// overrides. Throws ScenarioError for invalid input.
Scenario resolve_scenario(const RunOptions& opts);

/// Execute one command against the resolved scenario and return the report.
/// Commands: geometry-probe, simulate, multipliers, check1, singular,
/// check2, check2-free, certify, exg.
Report run_command(const RunOptions& opts);

}  // namespace riemoc::cli
