#include <CLI11.hpp>
#include <iostream>

#include "riemoc/runner.hpp"

using namespace riemoc;

int main(int argc, char** argv) {
  CLI::App app{"riemoc - necessary-condition checks for multi-objective optimal control on "
               "Riemannian manifolds"};
  app.require_subcommand(1);

  cli::RunOptions opts;
  std::string report_path, csv_path, point_text;
  double T = 0.0, margin = 0.0, tol = 0.0;
  int steps = 0, samples = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opts.scenario_path, "scenario JSON file");
    sub->add_option("--builtin", opts.builtin, "builtin scenario name (example-exg)");
    sub->add_option("--T", T, "horizon override");
    sub->add_option("--steps", steps, "grid steps override (even)");
    sub->add_option("--samples", samples, "multiplier cross-section sample count");
    sub->add_option("--margin-tol", margin, "certification margin tolerance");
    sub->add_option("--tol", tol, "first-order / singular residual tolerance");
    sub->add_option("--report", report_path, "write the JSON report here");
    sub->add_option("--csv", csv_path, "write the CSV time series here");
  };

  for (const char* name :
       {"geometry-probe", "simulate", "multipliers", "check1", "singular", "check2",
        "check2-free", "certify", "exg"}) {
    auto* sub = app.add_subcommand(name);
    add_common(sub);
    if (std::string(name) == "geometry-probe")
      sub->add_option("--point", point_text, "chart point, comma separated");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  auto* sub = app.get_subcommands().front();
  opts.command = sub->get_name();
  if (sub->count("--T")) opts.T_override = T;
  if (sub->count("--steps")) opts.steps_override = steps;
  if (sub->count("--samples")) opts.samples_override = samples;
  if (sub->count("--margin-tol")) opts.margin_override = margin;
  if (sub->count("--tol")) opts.tol_override = tol;
  if (!point_text.empty()) {
    std::stringstream ss(point_text);
    std::string part;
    while (std::getline(ss, part, ',')) opts.probe_point.push_back(std::stod(part));
  }

  try {
    cli::Report rep = cli::run_command(opts);
    if (!report_path.empty()) cli::write_report_json(rep, report_path);
    if (!csv_path.empty()) cli::write_report_csv(rep, csv_path);
    if (rep.body.contains("verdict"))
      std::cout << "verdict: " << rep.body["verdict"].get<std::string>() << "\n";
    if (rep.body.contains("certify")) {
      const auto& cert = rep.body["certify"];
      std::cout << "margin: " << cert["margin"].dump() << "\n";
      if (cert.contains("minimizing_ell"))
        std::cout << "minimizing ell: " << cert["minimizing_ell"].dump() << "\n";
    }
    if (rep.body.contains("geometry")) std::cout << rep.body["geometry"].dump(2) << "\n";
    if (rep.body.contains("multipliers") && !rep.body.contains("certify"))
      std::cout << "multiplier rays: " << rep.body["multipliers"]["rays"].dump() << "\n";
    if (rep.body.contains("singular") && opts.command == "singular")
      std::cout << rep.body["singular"].dump(2) << "\n";
    if (rep.body.contains("second_order") && opts.command.rfind("check2", 0) == 0)
      std::cout << rep.body["second_order"].dump(2) << "\n";
    if (rep.body.contains("trajectory") && opts.command == "simulate")
      std::cout << rep.body["trajectory"].dump(2) << "\n";
    std::cout << "report hash: " << rep.content_hash() << "\n";
    return 0;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
