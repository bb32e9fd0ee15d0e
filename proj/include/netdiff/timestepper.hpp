#pragma once

// Time integration of the coupled system.
//
// Both schemes take uniform backward Euler steps:
//  * monolithic: one Newton iteration on the full (u, w, z) residual with a
//    sparse LU solve and a backtracking line search;
//  * splitting: a fixed-point loop per step that alternates a PDE solve with
//    the vertex values frozen and the exact integration of the vertex ODE
//    along piecewise-linear edge traces.
//
// The vertex ODE  z' = S(t) - Lambda z  with piecewise-linear S has the
// closed form
//   z(t) = z0 exp(-Lambda t) + sum over cells of
//          exp(Lambda (a - t)) [ v_a tau h1(x) + m tau^2 g2(x) ],
// with tau the cell width, x = Lambda tau, m the cell slope,
// h1(x) = (e^x - 1)/x and g2(x) = (x e^x - e^x + 1)/x^2; the small-x branches
// avoid cancellation so the evaluation stays accurate down to Lambda = 0.

#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "netdiff/assembly.hpp"

namespace netdiff {

struct SolverConfig {
  double dt = 1e-2;
  double t_end = 1.0;
  double newton_tol = 1e-10;       // absolute tolerance on the residual 2-norm
  int newton_max_iter = 30;
  bool line_search = true;
  int max_backtracks = 20;
  enum class Scheme { monolithic, splitting };
  Scheme scheme = Scheme::monolithic;
  double fixed_point_tol = 1e-10;  // max-norm tolerance on the vertex values
  int fixed_point_max_iter = 50;
  bool store_states = false;
};

struct StepFailure : std::runtime_error {
  double time;
  explicit StepFailure(double t, const std::string& what)
      : std::runtime_error("step to t = " + format_time(t) + " failed: " + what), time(t) {}

 private:
  static std::string format_time(double t) {
    std::ostringstream os;
    os << t;
    return os.str();
  }
};

struct StepStats {
  int newton_iterations = 0;
  int fixed_point_iterations = 0;
  double final_residual = 0.0;
  std::vector<double> fixed_point_errors;  // per fixed-point sweep
};

// --- exact vertex ODE -----------------------------------------------------------

struct PiecewiseLinear {
  std::vector<double> t;  // strictly increasing knots
  std::vector<double> v;

  double operator()(double s) const {
    if (t.empty()) return 0.0;
    if (s <= t.front()) return v.front();
    if (s >= t.back()) return v.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    const double tau = t[k + 1] - t[k];
    const double xi = (s - t[k]) / tau;
    return (1.0 - xi) * v[k] + xi * v[k + 1];
  }
};

namespace detail {

inline double h1_expm1_over_x(double x) {
  if (x == 0.0) return 1.0;
  return std::expm1(x) / x;
}

inline double g2_kernel(double x) {
  if (std::abs(x) < 1e-4) return 0.5 + x / 3.0 + x * x / 8.0;
  return (x * std::exp(x) - std::expm1(x)) / (x * x);
}

}  // namespace detail

// Exact solution at time t of z' = S(s) - Lambda z, z(0) = z0, for a
// piecewise-linear source S.  Beyond the last knot S is extended constantly.
inline double solve_vertex_ode_exact(double z0, double Lambda, const PiecewiseLinear& S,
                                     double t) {
  if (Lambda < 0.0) throw std::invalid_argument("vertex decay rate must be non-negative");
  if (!(t >= 0.0)) throw std::invalid_argument("evaluation time must be non-negative");
  double z = z0 * std::exp(-Lambda * t);
  if (S.t.empty()) return z;

  // Integration cells: the trace knots restricted to [0, t], plus a constant
  // tail if t runs past the last knot.
  std::vector<double> knots;
  knots.push_back(0.0);
  for (std::size_t k = 0; k < S.t.size(); ++k)
    if (S.t[k] > 0.0 && S.t[k] < t) knots.push_back(S.t[k]);
  knots.push_back(t);

  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double a = knots[k], b = knots[k + 1];
    const double tau = b - a;
    if (tau <= 0.0) continue;
    const double va = S(a), vb = S(b);
    const double m = (vb - va) / tau;
    const double x = Lambda * tau;
    const double front = std::exp(Lambda * (a - t));
    z += front * (va * tau * detail::h1_expm1_over_x(x) +
                  m * tau * tau * detail::g2_kernel(x));
  }
  return z;
}

// --- Newton step -----------------------------------------------------------------

namespace detail {

inline void axpy_state(DiscreteState& x, double s, const BlockLayout& L,
                       const Eigen::VectorXd& d, bool include_z) {
  for (std::size_t i = 0; i < x.u.size(); ++i)
    x.u[i] += s * d.segment(L.u_offset[i], x.u[i].size());
  for (std::size_t j = 0; j < x.w.size(); ++j)
    x.w[j] += s * d.segment(L.w_offset[j], x.w[j].size());
  if (include_z) x.z += s * d.segment(L.z_offset, x.z.size());
}

// Newton iteration on the backward Euler residual; with freeze_z the vertex
// slots are carried along unchanged.
inline DiscreteState newton_solve(const AssemblyContext& ctx, const DiscreteState& initial_guess,
                                  const DiscreteState& prev, double dt, double t_new,
                                  const SolverConfig& cfg, bool freeze_z, StepStats* stats) {
  DiscreteState x = initial_guess;
  Eigen::VectorXd R = assemble_residual(ctx, x, prev, dt, t_new, freeze_z);
  double rn = R.norm();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

  for (int it = 0;; ++it) {
    if (rn <= cfg.newton_tol) {
      if (stats) {
        stats->newton_iterations += it;
        stats->final_residual = rn;
      }
      return x;
    }
    if (it >= cfg.newton_max_iter) {
      std::ostringstream os;
      os << "Newton did not reach tolerance " << cfg.newton_tol << " in " << cfg.newton_max_iter
         << " iterations (residual " << rn << ")";
      throw StepFailure(t_new, os.str());
    }

    Eigen::SparseMatrix<double> J = assemble_tangent(ctx, x, dt, freeze_z);
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw StepFailure(t_new, "tangent factorization failed");
    const Eigen::VectorXd delta = lu.solve(-R);
    if (lu.info() != Eigen::Success) throw StepFailure(t_new, "tangent solve failed");

    if (!cfg.line_search) {
      axpy_state(x, 1.0, ctx.layout, delta, !freeze_z);
      R = assemble_residual(ctx, x, prev, dt, t_new, freeze_z);
      rn = R.norm();
      continue;
    }

    double s = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      DiscreteState trial = x;
      axpy_state(trial, s, ctx.layout, delta, !freeze_z);
      Eigen::VectorXd R_trial = assemble_residual(ctx, trial, prev, dt, t_new, freeze_z);
      const double rn_trial = R_trial.norm();
      if (rn_trial <= (1.0 - 1e-4 * s) * rn) {
        x = std::move(trial);
        R = std::move(R_trial);
        rn = rn_trial;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) {
      std::ostringstream os;
      os << "line search stalled at residual " << rn;
      throw StepFailure(t_new, os.str());
    }
  }
}

}  // namespace detail

// One backward Euler step from prev (at t_new - dt) to t_new.
inline DiscreteState step(const AssemblyContext& ctx, const DiscreteState& prev, double dt,
                          double t_new, const SolverConfig& cfg, StepStats* stats = nullptr) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");

  if (cfg.scheme == SolverConfig::Scheme::monolithic)
    return detail::newton_solve(ctx, prev, prev, dt, t_new, cfg, false, stats);

  // Splitting: alternate the PDE solve (vertex values frozen) with the exact
  // vertex ODE driven by the piecewise-linear endpoint traces of w.
  DiscreteState x = prev;
  for (int sweep = 0; sweep < cfg.fixed_point_max_iter; ++sweep) {
    if (stats) ++stats->fixed_point_iterations;
    x = detail::newton_solve(ctx, x, prev, dt, t_new, cfg, true, stats);

    Eigen::VectorXd z_new(x.z.size());
    for (const auto& va : ctx.verts) {
      const auto& js = va.junction;
      double Lambda = 0.0, s0 = 0.0, s1 = 0.0;
      for (int n = 0; n < static_cast<int>(js.edge_order.size()); ++n) {
        Lambda += js.lambda[n];
        s0 += js.E(n, n) * prev.w[va.edge_pos[n]][va.endpoint_node[n]];
        s1 += js.E(n, n) * x.w[va.edge_pos[n]][va.endpoint_node[n]];
      }
      PiecewiseLinear trace;
      trace.t = {0.0, dt};
      trace.v = {s0, s1};
      z_new[va.pos] = solve_vertex_ode_exact(prev.z[va.pos], Lambda, trace, dt);
    }

    const double err = (z_new - x.z).lpNorm<Eigen::Infinity>();
    if (stats) stats->fixed_point_errors.push_back(err);
    x.z = z_new;
    if (err <= cfg.fixed_point_tol) return x;
  }
  std::ostringstream os;
  os << "vertex fixed-point iteration did not reach tolerance " << cfg.fixed_point_tol << " in "
     << cfg.fixed_point_max_iter << " sweeps";
  throw StepFailure(t_new, os.str());
}

// --- run loop --------------------------------------------------------------------

struct TimeSeries {
  std::vector<double> times;
  std::vector<DiscreteState> states;  // filled when SolverConfig::store_states
  DiscreteState final_state;
  int steps = 0;
  long total_newton_iterations = 0;
  int max_newton_iterations = 0;
  long total_fixed_point_iterations = 0;
};

using StepObserver = std::function<void(double t, const DiscreteState&)>;

// Integrate from t = 0 to t_end with uniform steps of cfg.dt (the last step
// shrinks to land on t_end exactly).  The observer fires for the initial
// state and after every accepted step.
inline TimeSeries run(const AssemblyContext& ctx, const DiscreteState& initial,
                      const SolverConfig& cfg, const StepObserver& observer = {}) {
  if (!(cfg.t_end >= 0.0)) throw std::invalid_argument("t_end must be non-negative");
  TimeSeries out;
  DiscreteState x = initial;
  out.times.push_back(0.0);
  if (cfg.store_states) out.states.push_back(x);
  if (observer) observer(0.0, x);

  const long n_steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  for (long k = 0; k < n_steps; ++k) {
    const double t_prev = std::min(static_cast<double>(k) * cfg.dt, cfg.t_end);
    const double t_new = std::min(static_cast<double>(k + 1) * cfg.dt, cfg.t_end);
    StepStats stats;
    x = step(ctx, x, t_new - t_prev, t_new, cfg, &stats);
    ++out.steps;
    out.total_newton_iterations += stats.newton_iterations;
    out.max_newton_iterations = std::max(out.max_newton_iterations, stats.newton_iterations);
    out.total_fixed_point_iterations += stats.fixed_point_iterations;
    out.times.push_back(t_new);
    if (cfg.store_states) out.states.push_back(x);
    if (observer) observer(t_new, x);
  }
  out.final_state = std::move(x);
  return out;
}

}  // namespace netdiff
