#pragma once

// Shrinking-vertex study on an interval.
//
// The delta-model resolves a vertex of width delta around the origin:
//   v on (-L, -delta/2):  dv/dt - v'' + g(v) = 0,   v'(-L) = 0,
//   w on (-delta/2, delta/2):  dw/dt - w'' + lambda w = 0,
//   u on (delta/2, L):    du/dt - u'' + g(u) = 0,   u'(L) = 0,
// coupled through exchange boundary conditions
//   u'(delta/2)  = theta (u - w),        (1/delta) w'(delta/2)  = theta (u - w),
//   v'(-delta/2) = mu (w - v),           (1/delta) w'(-delta/2) = -mu (v - w),
// so that  int v + (1/delta) int w + int u  is conserved when lambda = g = 0.
//
// Its delta -> 0 limit replaces the vertex region by a single value z:
//   u'(0) = theta (u - z),  v'(0) = mu (z - v),
//   dz/dt + lambda z = theta (u(0) - z) + mu (v(0) - z).
//
// Both models are discretized with P1 elements and backward Euler Newton
// steps (the code mirrors the main solver at interval scale).  The study
// solves the delta-model for a list of widths and reports, per width, the
// gap |wbar - z| between the averaged vertex region wbar = (1/delta) int w
// and the limit vertex value, plus the L2 distance of the edge fields on the
// common part of the interval.

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "netdiff/model.hpp"

namespace netdiff {

struct VertexLimitConfig {
  double L = 1.0;
  double theta = 1.0;
  double mu = 1.0;
  double lambda = 0.0;
  ReactionLaw edge_reaction;             // g on both edges
  double h = 0.01;
  double dt = 1e-3;
  double t_end = 0.5;
  std::function<double(double)> u0;      // initial data, x in (0, L)
  std::function<double(double)> v0;      // initial data, x in (-L, 0)
  double w0 = 0.0;                       // initial vertex-region value and z(0)
  double newton_tol = 1e-12;
  int newton_max_iter = 30;
};

struct Field1D {
  std::vector<double> x;   // ascending nodes
  Eigen::VectorXd values;
};

struct DeltaModelSolution {
  Field1D v, w, u;
  double wbar_final = 0.0;
  double mass_initial = 0.0, mass_final = 0.0;  // int v + (1/delta) int w + int u
};

struct LimitModelSolution {
  Field1D v, u;
  double z_final = 0.0;
  double mass_initial = 0.0, mass_final = 0.0;  // int v + z + int u
};

struct VertexLimitRow {
  double delta = 0.0;
  double z_discrepancy = 0.0;   // |wbar(t_end) - z_limit(t_end)|
  double edge_l2_error = 0.0;   // edge fields vs the limit on the common part
};

struct VertexLimitResult {
  std::vector<VertexLimitRow> rows;
  double z_limit_final = 0.0;
};

namespace detail {

inline std::vector<double> uniform_nodes(double a, double b, double h) {
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
  std::vector<double> xs(n + 1);
  for (int i = 0; i <= n; ++i) xs[i] = a + (b - a) * static_cast<double>(i) / n;
  return xs;
}

inline double trapezoid(const std::vector<double>& x, const Eigen::VectorXd& v) {
  double out = 0.0;
  for (std::size_t c = 0; c + 1 < x.size(); ++c)
    out += 0.5 * (x[c + 1] - x[c]) * (v[c] + v[c + 1]);
  return out;
}

inline double interp1(const std::vector<double>& x, const Eigen::VectorXd& v, double s) {
  if (s <= x.front()) return v[0];
  if (s >= x.back()) return v[v.size() - 1];
  const auto it = std::upper_bound(x.begin(), x.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - x.begin()) - 1;
  const double xi = (s - x[k]) / (x[k + 1] - x[k]);
  return (1.0 - xi) * v[k] + xi * v[k + 1];
}

// Shared piece assembly: backward Euler mass + unit-diffusion stiffness +
// reaction, all scaled by `scale` (1 for edges, 1/delta for the vertex
// region whose mass functional carries that weight).
struct Piece1D {
  const std::vector<double>* x = nullptr;
  Eigen::Index offset = 0;
  double scale = 1.0;
  ReactionLaw reaction;
  double linear_rate = 0.0;  // additional linear decay (lambda w)
};

inline void add_piece_residual(const Piece1D& p, const Eigen::VectorXd& state,
                               const Eigen::VectorXd& prev, double dt, Eigen::VectorXd& R) {
  const auto& x = *p.x;
  for (std::size_t c = 0; c + 1 < x.size(); ++c) {
    const double h = x[c + 1] - x[c];
    const Eigen::Index a = p.offset + static_cast<Eigen::Index>(c);
    const double slope = (state[a + 1] - state[a]) / h;
    R[a] -= p.scale * slope;
    R[a + 1] += p.scale * slope;
    for (double xi : {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)}) {
      const double psi0 = 1.0 - xi, psi1 = xi;
      const double q = psi0 * state[a] + psi1 * state[a + 1];
      const double qp = psi0 * prev[a] + psi1 * prev[a + 1];
      const double val = (q - qp) / dt + reaction_eval(p.reaction, q) + p.linear_rate * q;
      const double weight = p.scale * 0.5 * h;
      R[a] += weight * val * psi0;
      R[a + 1] += weight * val * psi1;
    }
  }
}

inline void add_piece_tangent(const Piece1D& p, const Eigen::VectorXd& state, double dt,
                              std::vector<Eigen::Triplet<double>>& trips) {
  const auto& x = *p.x;
  for (std::size_t c = 0; c + 1 < x.size(); ++c) {
    const double h = x[c + 1] - x[c];
    const Eigen::Index a = p.offset + static_cast<Eigen::Index>(c);
    const double k = p.scale / h;
    trips.emplace_back(a, a, k);
    trips.emplace_back(a, a + 1, -k);
    trips.emplace_back(a + 1, a, -k);
    trips.emplace_back(a + 1, a + 1, k);
    for (double xi : {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)}) {
      const double psi0 = 1.0 - xi, psi1 = xi;
      const double q = psi0 * state[a] + psi1 * state[a + 1];
      const double fac = 1.0 / dt + reaction_derivative(p.reaction, q) + p.linear_rate;
      const double weight = p.scale * 0.5 * h;
      trips.emplace_back(a, a, weight * fac * psi0 * psi0);
      trips.emplace_back(a, a + 1, weight * fac * psi0 * psi1);
      trips.emplace_back(a + 1, a, weight * fac * psi1 * psi0);
      trips.emplace_back(a + 1, a + 1, weight * fac * psi1 * psi1);
    }
  }
}

// Newton loop for one backward Euler step of a generic 1D block system.
template <class ResidualFn, class TangentFn>
inline void newton_1d(const ResidualFn& residual, const TangentFn& tangent, Eigen::VectorXd& x,
                      double tol, int max_iter, double t_new) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::VectorXd R = residual(x);
  for (int it = 0;; ++it) {
    const double rn = R.norm();
    if (rn <= tol) return;
    if (it >= max_iter)
      throw std::runtime_error("vertex-limit Newton stalled at t = " + std::to_string(t_new) +
                               " (residual " + std::to_string(rn) + ")");
    Eigen::SparseMatrix<double> J = tangent(x);
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("vertex-limit tangent factorization failed");
    const Eigen::VectorXd delta = lu.solve(-R);
    double s = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 25; ++bt) {
      Eigen::VectorXd trial = x + s * delta;
      Eigen::VectorXd R_trial = residual(trial);
      if (R_trial.norm() <= (1.0 - 1e-4 * s) * rn) {
        x = std::move(trial);
        R = std::move(R_trial);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted)
      throw std::runtime_error("vertex-limit line search stalled at t = " +
                               std::to_string(t_new));
  }
}

}  // namespace detail

inline DeltaModelSolution solve_delta_model(const VertexLimitConfig& cfg, double delta) {
  if (!(delta > 0.0) || delta >= 2.0 * cfg.L)
    throw std::invalid_argument("vertex width must satisfy 0 < delta < 2L");
  if (!cfg.u0 || !cfg.v0) throw std::invalid_argument("initial data u0, v0 must be set");

  DeltaModelSolution sol;
  sol.v.x = detail::uniform_nodes(-cfg.L, -0.5 * delta, cfg.h);
  sol.w.x = detail::uniform_nodes(-0.5 * delta, 0.5 * delta, cfg.h);
  sol.u.x = detail::uniform_nodes(0.5 * delta, cfg.L, cfg.h);
  const Eigen::Index nv = static_cast<Eigen::Index>(sol.v.x.size());
  const Eigen::Index nw = static_cast<Eigen::Index>(sol.w.x.size());
  const Eigen::Index nu = static_cast<Eigen::Index>(sol.u.x.size());

  detail::Piece1D pv{&sol.v.x, 0, 1.0, cfg.edge_reaction, 0.0};
  detail::Piece1D pw{&sol.w.x, nv, 1.0 / delta, ReactionLaw{}, cfg.lambda};
  detail::Piece1D pu{&sol.u.x, nv + nw, 1.0, cfg.edge_reaction, 0.0};
  const Eigen::Index total = nv + nw + nu;
  const Eigen::Index v_end = nv - 1;           // node at -delta/2
  const Eigen::Index w_lo = nv;                // node at -delta/2
  const Eigen::Index w_hi = nv + nw - 1;       // node at +delta/2
  const Eigen::Index u_lo = nv + nw;           // node at +delta/2

  Eigen::VectorXd state(total);
  for (Eigen::Index i = 0; i < nv; ++i) state[i] = cfg.v0(sol.v.x[i]);
  for (Eigen::Index i = 0; i < nw; ++i) state[nv + i] = cfg.w0;
  for (Eigen::Index i = 0; i < nu; ++i) state[nv + nw + i] = cfg.u0(sol.u.x[i]);

  auto mass = [&](const Eigen::VectorXd& s) {
    return detail::trapezoid(sol.v.x, s.segment(0, nv)) +
           detail::trapezoid(sol.w.x, s.segment(nv, nw)) / delta +
           detail::trapezoid(sol.u.x, s.segment(nv + nw, nu));
  };
  sol.mass_initial = mass(state);

  Eigen::VectorXd prev = state;
  auto residual = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd R = Eigen::VectorXd::Zero(total);
    detail::add_piece_residual(pv, s, prev, cfg.dt, R);
    detail::add_piece_residual(pw, s, prev, cfg.dt, R);
    detail::add_piece_residual(pu, s, prev, cfg.dt, R);
    const double ex_u = cfg.theta * (s[u_lo] - s[w_hi]);
    R[u_lo] += ex_u;
    R[w_hi] -= ex_u;
    const double ex_v = cfg.mu * (s[v_end] - s[w_lo]);
    R[v_end] += ex_v;
    R[w_lo] -= ex_v;
    return R;
  };
  auto tangent = [&](const Eigen::VectorXd& s) {
    std::vector<Eigen::Triplet<double>> trips;
    detail::add_piece_tangent(pv, s, cfg.dt, trips);
    detail::add_piece_tangent(pw, s, cfg.dt, trips);
    detail::add_piece_tangent(pu, s, cfg.dt, trips);
    trips.emplace_back(u_lo, u_lo, cfg.theta);
    trips.emplace_back(u_lo, w_hi, -cfg.theta);
    trips.emplace_back(w_hi, u_lo, -cfg.theta);
    trips.emplace_back(w_hi, w_hi, cfg.theta);
    trips.emplace_back(v_end, v_end, cfg.mu);
    trips.emplace_back(v_end, w_lo, -cfg.mu);
    trips.emplace_back(w_lo, v_end, -cfg.mu);
    trips.emplace_back(w_lo, w_lo, cfg.mu);
    Eigen::SparseMatrix<double> J(total, total);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
  };

  const long n_steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  for (long k = 0; k < n_steps; ++k) {
    const double t_new = std::min(static_cast<double>(k + 1) * cfg.dt, cfg.t_end);
    detail::newton_1d(residual, tangent, state, cfg.newton_tol, cfg.newton_max_iter, t_new);
    prev = state;
  }

  sol.v.values = state.segment(0, nv);
  sol.w.values = state.segment(nv, nw);
  sol.u.values = state.segment(nv + nw, nu);
  sol.wbar_final = detail::trapezoid(sol.w.x, sol.w.values) / delta;
  sol.mass_final = mass(state);
  return sol;
}

inline LimitModelSolution solve_limit_model(const VertexLimitConfig& cfg) {
  if (!cfg.u0 || !cfg.v0) throw std::invalid_argument("initial data u0, v0 must be set");
  LimitModelSolution sol;
  sol.v.x = detail::uniform_nodes(-cfg.L, 0.0, cfg.h);
  sol.u.x = detail::uniform_nodes(0.0, cfg.L, cfg.h);
  const Eigen::Index nv = static_cast<Eigen::Index>(sol.v.x.size());
  const Eigen::Index nu = static_cast<Eigen::Index>(sol.u.x.size());
  const Eigen::Index total = nv + 1 + nu;
  const Eigen::Index z_at = nv;
  const Eigen::Index v_end = nv - 1;
  const Eigen::Index u_lo = nv + 1;

  detail::Piece1D pv{&sol.v.x, 0, 1.0, cfg.edge_reaction, 0.0};
  detail::Piece1D pu{&sol.u.x, nv + 1, 1.0, cfg.edge_reaction, 0.0};

  Eigen::VectorXd state(total);
  for (Eigen::Index i = 0; i < nv; ++i) state[i] = cfg.v0(sol.v.x[i]);
  state[z_at] = cfg.w0;
  for (Eigen::Index i = 0; i < nu; ++i) state[nv + 1 + i] = cfg.u0(sol.u.x[i]);

  auto mass = [&](const Eigen::VectorXd& s) {
    return detail::trapezoid(sol.v.x, s.segment(0, nv)) + s[z_at] +
           detail::trapezoid(sol.u.x, s.segment(nv + 1, nu));
  };
  sol.mass_initial = mass(state);

  Eigen::VectorXd prev = state;
  auto residual = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd R = Eigen::VectorXd::Zero(total);
    detail::add_piece_residual(pv, s, prev, cfg.dt, R);
    detail::add_piece_residual(pu, s, prev, cfg.dt, R);
    const double ex_u = cfg.theta * (s[u_lo] - s[z_at]);
    const double ex_v = cfg.mu * (s[v_end] - s[z_at]);
    R[u_lo] += ex_u;
    R[v_end] += ex_v;
    R[z_at] = (s[z_at] - prev[z_at]) / cfg.dt + cfg.lambda * s[z_at] - ex_u - ex_v;
    return R;
  };
  auto tangent = [&](const Eigen::VectorXd& s) {
    std::vector<Eigen::Triplet<double>> trips;
    detail::add_piece_tangent(pv, s, cfg.dt, trips);
    detail::add_piece_tangent(pu, s, cfg.dt, trips);
    trips.emplace_back(u_lo, u_lo, cfg.theta);
    trips.emplace_back(u_lo, z_at, -cfg.theta);
    trips.emplace_back(v_end, v_end, cfg.mu);
    trips.emplace_back(v_end, z_at, -cfg.mu);
    trips.emplace_back(z_at, z_at, 1.0 / cfg.dt + cfg.lambda + cfg.theta + cfg.mu);
    trips.emplace_back(z_at, u_lo, -cfg.theta);
    trips.emplace_back(z_at, v_end, -cfg.mu);
    Eigen::SparseMatrix<double> J(total, total);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
  };

  const long n_steps = static_cast<long>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  for (long k = 0; k < n_steps; ++k) {
    const double t_new = std::min(static_cast<double>(k + 1) * cfg.dt, cfg.t_end);
    detail::newton_1d(residual, tangent, state, cfg.newton_tol, cfg.newton_max_iter, t_new);
    prev = state;
  }

  sol.v.values = state.segment(0, nv);
  sol.z_final = state[z_at];
  sol.u.values = state.segment(nv + 1, nu);
  sol.mass_final = mass(state);
  return sol;
}

// Solve the delta-model for each width and compare against the shared limit
// solve.  Widths must satisfy 0 < delta < 2L.
inline VertexLimitResult vertex_limit_study(const VertexLimitConfig& cfg,
                                            const std::vector<double>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("no vertex widths given");
  VertexLimitResult out;
  const LimitModelSolution limit = solve_limit_model(cfg);
  out.z_limit_final = limit.z_final;

  for (double delta : deltas) {
    const DeltaModelSolution dm = solve_delta_model(cfg, delta);
    VertexLimitRow row;
    row.delta = delta;
    row.z_discrepancy = std::abs(dm.wbar_final - limit.z_final);

    // L2 distance of the edge fields on the common part of the interval,
    // integrated on the delta-model cells with 2-point Gauss.
    double err2 = 0.0;
    auto accumulate = [&err2](const Field1D& coarse, const Field1D& reference) {
      for (std::size_t c = 0; c + 1 < coarse.x.size(); ++c) {
        const double h = coarse.x[c + 1] - coarse.x[c];
        for (double xi : {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)}) {
          const double xq = coarse.x[c] + xi * h;
          const double a = (1.0 - xi) * coarse.values[c] + xi * coarse.values[c + 1];
          const double b = detail::interp1(reference.x, reference.values, xq);
          err2 += 0.5 * h * (a - b) * (a - b);
        }
      }
    };
    accumulate(dm.u, limit.u);
    accumulate(dm.v, limit.v);
    row.edge_l2_error = std::sqrt(err2);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace netdiff
