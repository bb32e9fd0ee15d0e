// Command-line front end.
//
//   netdiff check        --config c.json            geometry + assumption report
//   netdiff run          --config c.json [--out d]  simulate and emit outputs
//   netdiff extinction   --config c.json [--out d]  run + extinction fit report
//   netdiff vertex-limit --config c.json [--out d]  shrinking-vertex study
//   netdiff mass-report  --config c.json [--out d]  conservation audit of a run
//
// Common flags: --override key=value (dotted JSON path, repeatable).
// NETDIFF_THREADS caps assembly parallelism.  Exit codes: 0 success,
// 1 validation/config/io failure, 2 solver failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "netdiff/config.hpp"
#include "netdiff/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"simulator for reaction-diffusion systems coupled through an embedded network"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "override the output directory");
    sub->add_option("--override", overrides,
                    "override a config entry, e.g. discretization.dt=1e-3 (repeatable)");
  };

  CLI::App* check = app.add_subcommand("check", "validate geometry and model assumptions");
  CLI::App* run = app.add_subcommand("run", "time-step the coupled system and emit outputs");
  CLI::App* extinction =
      app.add_subcommand("extinction", "run and report the finite-time extinction fit");
  CLI::App* vertex_limit =
      app.add_subcommand("vertex-limit", "compare finite vertex regions against the limit model");
  CLI::App* mass_report =
      app.add_subcommand("mass-report", "audit mass conservation of an existing run");
  for (CLI::App* sub : {check, run, extinction, vertex_limit, mass_report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  int threads = 1;
  if (const char* env = std::getenv("NETDIFF_THREADS")) {
    threads = std::max(1, std::atoi(env));
  }

  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file: " << config_path << "\n";
      return 1;
    }
    netdiff::json root;
    try {
      root = netdiff::json::parse(in);
    } catch (const netdiff::json::parse_error& err) {
      std::cerr << "error: config is not valid JSON: " << err.what() << "\n";
      return 1;
    }
    for (const std::string& assignment : overrides) netdiff::apply_override(root, assignment);

    netdiff::RunConfig config = netdiff::parse_config(root);
    if (!out_dir.empty()) config.outputs.directory = out_dir;

    if (check->parsed()) return netdiff::cmd_check(config, std::cout);
    if (run->parsed()) return netdiff::cmd_run(config, threads, std::cout);
    if (extinction->parsed()) return netdiff::cmd_extinction(config, threads, std::cout);
    if (vertex_limit->parsed()) return netdiff::cmd_vertex_limit(config, std::cout);
    if (mass_report->parsed()) return netdiff::cmd_mass_report(config, std::cout);
    std::cerr << "error: no subcommand selected\n";
    return 1;
  } catch (const netdiff::StepFailure& err) {
    std::cerr << "solver failure: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
