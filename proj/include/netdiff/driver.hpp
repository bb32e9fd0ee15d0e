#pragma once

// Glue between a parsed RunConfig and the solver stack, plus the bodies of
// the CLI subcommands.  Keeping the subcommands as library functions lets the
// test suites drive them in-process and keeps the binary entry point thin.
//
// Exit codes: 0 success, 1 validation/config/io failure, 2 solver failure.

#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "netdiff/analysis.hpp"
#include "netdiff/assembly.hpp"
#include "netdiff/config.hpp"
#include "netdiff/expression.hpp"
#include "netdiff/geometry.hpp"
#include "netdiff/io.hpp"
#include "netdiff/mesh.hpp"
#include "netdiff/model.hpp"
#include "netdiff/timestepper.hpp"
#include "netdiff/vertex_limit.hpp"

namespace netdiff {

// Owns everything the assembly context points into; heap-allocate so the
// addresses stay stable.
struct Simulation {
  RunConfig config;
  MeshSet meshes;
  AssemblyContext ctx;
  DiscreteState initial;
};

inline void attach_sources(Simulation& sim) {
  for (const auto& [id, expr] : sim.config.source_u) {
    sim.ctx.u_sources[id] = [expr](double t, const Vec2& p) {
      ExprEnv env;
      env.x = p.x();
      env.y = p.y();
      env.t = t;
      return expr.eval(env);
    };
  }
  for (const auto& [id, expr] : sim.config.source_w) {
    const Edge& e = sim.config.domain.edge(id);
    const Vec2 a = sim.config.domain.vertex(e.source_vertex).position;
    const Vec2 b = sim.config.domain.vertex(e.terminal_vertex).position;
    const double length = e.length;
    sim.ctx.w_sources[id] = [expr, a, b, length](double t, double s) {
      const double c = std::min(1.0, std::max(0.0, s / length));
      const Vec2 p = a + c * (b - a);
      ExprEnv env;
      env.x = p.x();
      env.y = p.y();
      env.arclength = s;
      env.t = t;
      return expr.eval(env);
    };
  }
}

inline DiscreteState evaluate_initial_state(const Simulation& sim) {
  const BlockLayout& layout = sim.ctx.layout;
  DiscreteState x = make_zero_state(layout, sim.meshes);
  for (std::size_t i = 0; i < layout.subdomain_ids.size(); ++i) {
    const auto it = sim.config.initial_u.find(layout.subdomain_ids[i]);
    if (it == sim.config.initial_u.end()) continue;
    const SubdomainMesh& mesh = sim.meshes.subdomain_mesh(layout.subdomain_ids[i]);
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
      ExprEnv env;
      env.x = mesh.nodes[n].x();
      env.y = mesh.nodes[n].y();
      x.u[i][static_cast<Eigen::Index>(n)] = it->second.eval(env);
    }
  }
  for (std::size_t j = 0; j < layout.edge_ids.size(); ++j) {
    const auto it = sim.config.initial_w.find(layout.edge_ids[j]);
    if (it == sim.config.initial_w.end()) continue;
    const Edge& e = sim.config.domain.edge(layout.edge_ids[j]);
    const EdgeMesh& mesh = sim.meshes.edge_mesh(layout.edge_ids[j]);
    for (std::size_t n = 0; n < mesh.nodes.size(); ++n) {
      const Vec2 p = detail::edge_node_position(sim.config.domain, e, mesh.nodes[n]);
      ExprEnv env;
      env.x = p.x();
      env.y = p.y();
      env.arclength = mesh.nodes[n];
      x.w[j][static_cast<Eigen::Index>(n)] = it->second.eval(env);
    }
  }
  for (std::size_t k = 0; k < layout.vertex_ids.size(); ++k) {
    const auto it = sim.config.initial_z.find(layout.vertex_ids[k]);
    if (it != sim.config.initial_z.end()) x.z[static_cast<Eigen::Index>(k)] = it->second;
  }
  return x;
}

inline std::unique_ptr<Simulation> make_simulation(RunConfig config, int threads = 1) {
  auto sim = std::make_unique<Simulation>();
  sim->config = std::move(config);

  const auto geometry_problems = validate_geometry(sim->config.domain);
  if (!geometry_problems.empty()) {
    std::string what = "geometry validation failed:";
    for (const auto& p : geometry_problems) what += "\n  - " + p;
    throw ConfigError(what);
  }

  MeshOptions options;
  options.generator = sim->config.mesh_generator;
  sim->meshes = mesh_domain(sim->config.domain, sim->config.h, options);
  sim->ctx = make_context(sim->config.domain, sim->meshes, sim->config.model);
  sim->ctx.threads = std::max(1, threads);
  attach_sources(*sim);
  sim->initial = evaluate_initial_state(*sim);
  return sim;
}

struct RunOutcome {
  TimeSeries series;
  std::vector<ReportRow> rows;
};

inline RunOutcome execute_run(Simulation& sim, const StepObserver& extra = {}) {
  RunOutcome out;
  double X0 = -1.0;
  StepObserver observer = [&](double t, const DiscreteState& x) {
    ReportRow row = compute_row(sim.ctx, x, t, X0);
    if (X0 < 0.0) X0 = row.X;
    out.rows.push_back(std::move(row));
    if (extra) extra(t, x);
  };
  out.series = run(sim.ctx, sim.initial, sim.config.solver, observer);
  return out;
}

// --- subcommand bodies ------------------------------------------------------------

inline int cmd_check(const RunConfig& config, std::ostream& os) {
  os << "geometry: " << config.domain.vertices.size() << " vertices, "
     << config.domain.edges.size() << " edges, " << config.domain.subdomains.size()
     << " subdomains\n";
  const auto geometry_problems = validate_geometry(config.domain);
  if (geometry_problems.empty()) {
    os << "geometry checks: pass\n";
  } else {
    os << "geometry checks: " << geometry_problems.size() << " violation(s)\n";
    for (const auto& p : geometry_problems) os << "  - " << p << "\n";
  }
  const auto assumption_problems =
      check_assumptions(config.model, config.domain, config.model.subdomain_flux.p);
  if (assumption_problems.empty()) {
    os << "assumptions: all pass\n";
  } else {
    os << "assumptions: " << assumption_problems.size() << " violation(s)\n";
    for (const auto& p : assumption_problems) os << "  - " << p << "\n";
  }
  return geometry_problems.empty() && assumption_problems.empty() ? 0 : 1;
}

inline int cmd_run(const RunConfig& config, int threads, std::ostream& os) {
  auto sim = make_simulation(config, threads);
  for (const auto& note : sim->meshes.notes) os << "note: " << note << "\n";
  ensure_directory(config.outputs.directory);

  int observer_calls = 0;
  StepObserver vtk_observer;
  if (config.outputs.write_vtk) {
    vtk_observer = [&](double, const DiscreteState& x) {
      if (observer_calls % config.outputs.vtk_every == 0)
        write_vtk_snapshot(config.outputs.directory, observer_calls, sim->ctx, x);
      ++observer_calls;
    };
  }

  RunOutcome outcome;
  try {
    outcome = execute_run(*sim, vtk_observer);
  } catch (const StepFailure& err) {
    os << "solver failure: " << err.what() << "\n";
    return 2;
  }

  const std::string csv_path =
      config.outputs.directory + "/" + config.outputs.diagnostics_csv;
  write_text_file(csv_path,
                  diagnostics_csv_text(outcome.rows, sim->ctx.layout.vertex_ids));

  const auto summary = summary_json(
      config_hash(config), outcome.rows.back(), sim->ctx.layout.vertex_ids,
      outcome.series.steps, outcome.series.total_newton_iterations,
      outcome.series.max_newton_iterations, outcome.series.total_fixed_point_iterations,
      sim->meshes.notes);
  write_text_file(config.outputs.directory + "/" + config.outputs.summary_json,
                  summary.dump(2) + "\n");

  os << "steps: " << outcome.series.steps << "\n";
  os << "final time: " << format_full(outcome.rows.back().time) << "\n";
  os << "final mass: " << format_full(outcome.rows.back().total_mass) << "\n";
  os << "final X: " << format_full(outcome.rows.back().X) << "\n";
  os << "wrote " << csv_path << "\n";
  return 0;
}

inline int cmd_extinction(const RunConfig& config, int threads, std::ostream& os) {
  if (config.model.subdomain_reaction.kind != ReactionKind::power) {
    os << "extinction study needs a power reaction f(s) = c|s|^(sigma-2) s\n";
    return 1;
  }
  const ExtinctionExponents exponents = extinction_exponents(
      config.model.subdomain_flux.p, config.model.subdomain_reaction.exponent);

  auto sim = make_simulation(config, threads);
  ensure_directory(config.outputs.directory);
  RunOutcome outcome;
  try {
    outcome = execute_run(*sim);
  } catch (const StepFailure& err) {
    os << "solver failure: " << err.what() << "\n";
    return 2;
  }

  std::vector<double> times, X;
  times.reserve(outcome.rows.size());
  X.reserve(outcome.rows.size());
  for (const auto& row : outcome.rows) {
    times.push_back(row.time);
    X.push_back(row.X);
  }
  const ExtinctionFit fit = extinction_fit(times, X, exponents.s2);

  const std::string csv_path =
      config.outputs.directory + "/" + config.outputs.diagnostics_csv;
  write_text_file(csv_path,
                  diagnostics_csv_text(outcome.rows, sim->ctx.layout.vertex_ids));
  auto summary = summary_json(
      config_hash(config), outcome.rows.back(), sim->ctx.layout.vertex_ids,
      outcome.series.steps, outcome.series.total_newton_iterations,
      outcome.series.max_newton_iterations, outcome.series.total_fixed_point_iterations,
      sim->meshes.notes);
  summary["extinction"] = {{"extinct", fit.extinct},
                           {"t_extinct", fit.t_extinct},
                           {"slope", fit.slope},
                           {"intercept", fit.intercept},
                           {"r_squared", fit.r_squared},
                           {"max_second_difference", fit.max_second_difference},
                           {"window_count", fit.window_count},
                           {"s2", exponents.s2},
                           {"theta2", exponents.theta2}};
  write_text_file(config.outputs.directory + "/" + config.outputs.summary_json,
                  summary.dump(2) + "\n");

  os << "exponents: theta2 = " << format_full(exponents.theta2)
     << ", s2 = " << format_full(exponents.s2) << "\n";
  os << "extinct: " << (fit.extinct ? "yes" : "no") << "\n";
  if (fit.extinct) os << "t_extinct: " << format_full(fit.t_extinct) << "\n";
  os << "fit window: " << fit.window_count << " samples\n";
  os << "fit r_squared: " << format_full(fit.r_squared) << "\n";
  os << "max second difference: " << format_full(fit.max_second_difference) << "\n";
  return 0;
}

inline int cmd_vertex_limit(const RunConfig& config, std::ostream& os) {
  if (!config.vertex_limit.present) {
    os << "config has no vertex_limit section\n";
    return 1;
  }
  const VertexLimitSection& s = config.vertex_limit;
  if (s.deltas.empty()) {
    os << "vertex_limit.deltas is empty\n";
    return 1;
  }
  VertexLimitConfig vcfg;
  vcfg.L = s.L;
  vcfg.theta = s.theta;
  vcfg.mu = s.mu;
  vcfg.lambda = s.lambda;
  vcfg.edge_reaction = s.edge_reaction;
  vcfg.h = s.h;
  vcfg.dt = s.dt;
  vcfg.t_end = s.t_end;
  vcfg.w0 = s.w0;
  vcfg.newton_tol = s.newton_tol;
  vcfg.newton_max_iter = s.newton_max_iter;
  const Expression u0 = s.u0;
  const Expression v0 = s.v0;
  vcfg.u0 = [u0](double xc) {
    if (u0.empty()) return 0.0;
    ExprEnv env;
    env.x = xc;
    env.arclength = xc;
    return u0.eval(env);
  };
  vcfg.v0 = [v0](double xc) {
    if (v0.empty()) return 0.0;
    ExprEnv env;
    env.x = xc;
    env.arclength = xc;
    return v0.eval(env);
  };

  const VertexLimitResult result = vertex_limit_study(vcfg, s.deltas);
  os << "z_limit(t_end) = " << format_full(result.z_limit_final) << "\n";
  os << "delta,z_discrepancy,edge_l2_error\n";
  std::string csv = "delta,z_discrepancy,edge_l2_error\n";
  for (const auto& row : result.rows) {
    const std::string line = format_full(row.delta) + "," + format_full(row.z_discrepancy) +
                             "," + format_full(row.edge_l2_error);
    os << line << "\n";
    csv += line + "\n";
  }
  ensure_directory(config.outputs.directory);
  write_text_file(config.outputs.directory + "/vertex_limit.csv", csv);
  return 0;
}

inline int cmd_mass_report(const RunConfig& config, std::ostream& os) {
  const std::string csv_path =
      config.outputs.directory + "/" + config.outputs.diagnostics_csv;
  DiagnosticsTable table;
  try {
    table = read_diagnostics_csv(csv_path);
  } catch (const IoFailure& err) {
    os << err.what() << "\n";
    return 1;
  }
  if (table.rows.empty()) {
    os << "no data rows in " << csv_path << "\n";
    return 1;
  }
  const int time_col = table.column("time");
  const int mass_col = table.column("total_mass");
  const double mass0 = table.rows.front()[mass_col];
  const double scale = std::max(std::abs(mass0), 1e-300);
  double max_drift = 0.0;
  double t_worst = table.rows.front()[time_col];
  for (const auto& row : table.rows) {
    const double drift = std::abs(row[mass_col] - mass0) / scale;
    if (drift > max_drift) {
      max_drift = drift;
      t_worst = row[time_col];
    }
  }
  os << "rows: " << table.rows.size() << "\n";
  os << "initial mass: " << format_full(mass0) << "\n";
  os << "final mass: " << format_full(table.rows.back()[mass_col]) << "\n";
  os << "max relative drift: " << format_full(max_drift) << " at t = " << format_full(t_worst)
     << "\n";
  return 0;
}

}  // namespace netdiff
