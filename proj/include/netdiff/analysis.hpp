#pragma once

// Diagnostics of a discrete trajectory.
//
// Per-state quantities (all exact for P1 states):
//   total_mass = sum_i int u_i + sum_j int w_j + sum_k z_k,
//   X          = sum_i |u_i|_{L2}^2 + sum_j |w_j|_{L2}^2 + sum_k z_k^2,
//   sup_u/w    = largest absolute nodal value,
//   energy     = sum_i int kappa_hat(grad u_i) + sum_j int eta_hat(dx w_j),
// plus the vertex values themselves.  X is the quantity the finite-time
// extinction bound controls; extinction_fit() turns a sampled X(t) into the
// extinction time, a least-squares line through X^(1-s) on the leading part
// of the pre-extinction window, and the largest second difference (a
// concavity certificate) on the same window.
//
// extinction_exponents() evaluates the decay exponents
//   theta_d = (2-sigma)/2 * d p / (d p + sigma (p - d)),
//   1/s_d   = 1 + p (2-sigma) / (p (d+sigma) - d sigma),
// for spatial dimensions d = 1, 2.
//
// kirchhoff_residual() sums the one-sided outward fluxes at a vertex; for a
// symmetric unpopulated junction it coincides with the component sum of
// junction_flux_balance() up to rounding, and it tends to zero under mesh
// refinement for solutions of the continuous junction conditions.

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "netdiff/assembly.hpp"

namespace netdiff {

struct ReportRow {
  double time = 0.0;
  double total_mass = 0.0;
  double X = 0.0;
  double sup_u = 0.0;
  double sup_w = 0.0;
  double energy = 0.0;
  std::vector<double> z;
  bool extinct = false;
};

inline double total_mass(const AssemblyContext& ctx, const DiscreteState& x) {
  double mass = 0.0;
  for (const auto& sa : ctx.subs) {
    const Eigen::VectorXd& u = x.u[sa.pos];
    for (const auto& el : sa.tris)
      mass += el.area / 3.0 * (u[el.n[0]] + u[el.n[1]] + u[el.n[2]]);
  }
  for (const auto& ea : ctx.edge_blocks) {
    const Eigen::VectorXd& w = x.w[ea.pos];
    for (std::size_t c = 0; c < ea.cells.size(); ++c)
      mass += 0.5 * ea.cells[c].length * (w[c] + w[c + 1]);
  }
  mass += x.z.sum();
  return mass;
}

// Squared L2-type aggregate driving the extinction estimates.
inline double squared_norm_X(const AssemblyContext& ctx, const DiscreteState& x) {
  double X = 0.0;
  for (const auto& sa : ctx.subs) {
    const Eigen::VectorXd& u = x.u[sa.pos];
    for (const auto& el : sa.tris) {
      const double s = u[el.n[0]] + u[el.n[1]] + u[el.n[2]];
      const double sq = u[el.n[0]] * u[el.n[0]] + u[el.n[1]] * u[el.n[1]] +
                        u[el.n[2]] * u[el.n[2]];
      X += el.area / 12.0 * (s * s + sq);
    }
  }
  for (const auto& ea : ctx.edge_blocks) {
    const Eigen::VectorXd& w = x.w[ea.pos];
    for (std::size_t c = 0; c < ea.cells.size(); ++c)
      X += ea.cells[c].length / 3.0 *
           (w[c] * w[c] + w[c] * w[c + 1] + w[c + 1] * w[c + 1]);
  }
  X += x.z.squaredNorm();
  return X;
}

inline double dissipative_energy(const AssemblyContext& ctx, const DiscreteState& x) {
  double energy = 0.0;
  for (const auto& sa : ctx.subs) {
    const Eigen::VectorXd& u = x.u[sa.pos];
    for (const auto& el : sa.tris) {
      Vec2 grad = Vec2::Zero();
      for (int k = 0; k < 3; ++k) grad += u[el.n[k]] * el.grad[k];
      energy += el.area * antiderivative_eval(ctx.model->subdomain_flux, grad);
    }
  }
  for (const auto& ea : ctx.edge_blocks) {
    const Eigen::VectorXd& w = x.w[ea.pos];
    for (std::size_t c = 0; c < ea.cells.size(); ++c) {
      const double dw = (w[c + 1] - w[c]) / ea.cells[c].length;
      energy += ea.cells[c].length * antiderivative_eval(ctx.model->edge_flux, dw);
    }
  }
  return energy;
}

// One diagnostics row.  When X0 > 0 the extinction flag marks
// X <= 1e-12 * X0.
inline ReportRow compute_row(const AssemblyContext& ctx, const DiscreteState& x, double t,
                             double X0 = -1.0) {
  ReportRow row;
  row.time = t;
  row.total_mass = total_mass(ctx, x);
  row.X = squared_norm_X(ctx, x);
  for (const auto& u : x.u) row.sup_u = std::max(row.sup_u, u.lpNorm<Eigen::Infinity>());
  for (const auto& w : x.w) row.sup_w = std::max(row.sup_w, w.lpNorm<Eigen::Infinity>());
  row.energy = dissipative_energy(ctx, x);
  row.z.assign(x.z.data(), x.z.data() + x.z.size());
  row.extinct = (X0 > 0.0) && (row.X <= 1e-12 * X0);
  return row;
}

// Comparison-principle ceiling: the solution stays below
//   M = max( max over Robin pairs of (alpha/beta) sup|w_j|,  max_i sup|u_i(0)| ).
// edge_sup_w holds sup_t sup_x |w_j| per edge id; subdomain_sup_u0 the
// initial sup per subdomain id.
inline double comparison_bound(const ModelSpec& model, const PartitionedDomain& domain,
                               const std::map<int, double>& edge_sup_w,
                               const std::map<int, double>& subdomain_sup_u0) {
  double M = 0.0;
  for (const auto& e : domain.edges) {
    const auto it = edge_sup_w.find(e.id);
    if (it == edge_sup_w.end())
      throw std::invalid_argument("missing edge sup for edge " + std::to_string(e.id));
    for (int sid : e.adjacent_subdomains) {
      const double ratio =
          model.coupling.alpha_at(sid, e.id) / model.coupling.beta_at(sid, e.id);
      M = std::max(M, ratio * it->second);
    }
  }
  for (const auto& s : domain.subdomains) {
    const auto it = subdomain_sup_u0.find(s.id);
    if (it == subdomain_sup_u0.end())
      throw std::invalid_argument("missing initial sup for subdomain " + std::to_string(s.id));
    M = std::max(M, it->second);
  }
  return M;
}

// --- extinction exponents and fit ------------------------------------------------

struct ExtinctionExponents {
  double p = 2.0;
  double sigma = 1.5;
  double theta1 = 0.0;  // d = 1
  double theta2 = 0.0;  // d = 2
  double s1 = 0.0;
  double s2 = 0.0;
};

inline ExtinctionExponents extinction_exponents(double p, double sigma) {
  if (!(p >= 2.0)) throw std::invalid_argument("extinction exponents require p >= 2");
  if (!(sigma > 1.0 && sigma < 2.0))
    throw std::invalid_argument("extinction exponents require 1 < sigma < 2");
  ExtinctionExponents e;
  e.p = p;
  e.sigma = sigma;
  auto theta = [p, sigma](double d) {
    return 0.5 * (2.0 - sigma) * d * p / (d * p + sigma * (p - d));
  };
  auto s_of = [p, sigma](double d) {
    return 1.0 / (1.0 + p * (2.0 - sigma) / (p * (d + sigma) - d * sigma));
  };
  e.theta1 = theta(1.0);
  e.theta2 = theta(2.0);
  e.s1 = s_of(1.0);
  e.s2 = s_of(2.0);
  return e;
}

struct ExtinctionFit {
  bool extinct = false;
  double t_extinct = 0.0;            // first sample with X <= rel_threshold * X(0)
  double slope = 0.0;                // linear fit of X^(1-s) over the window
  double intercept = 0.0;
  double r_squared = 0.0;
  double max_second_difference = 0.0;
  std::size_t window_count = 0;      // samples in the fit window
};

// Fit a line through Y(t) = X(t)^(1-s) on the leading window_fraction of the
// pre-extinction interval.  The exact self-similar decay makes Y linear in
// time, so r_squared near 1 plus non-positive second differences certify the
// predicted power-law collapse.
inline ExtinctionFit extinction_fit(const std::vector<double>& t, const std::vector<double>& X,
                                    double s, double rel_threshold = 1e-12,
                                    double window_fraction = 0.8) {
  if (t.size() != X.size() || t.size() < 3)
    throw std::invalid_argument("extinction fit needs matching sample vectors (>= 3 points)");
  ExtinctionFit fit;
  const double X0 = X.front();
  if (!(X0 > 0.0)) throw std::invalid_argument("extinction fit needs X(0) > 0");

  std::size_t ext_idx = t.size() - 1;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i] <= rel_threshold * X0) {
      fit.extinct = true;
      fit.t_extinct = t[i];
      ext_idx = i;
      break;
    }
  }
  const double t_limit = window_fraction * (fit.extinct ? fit.t_extinct : t.back());

  std::vector<double> tw, yw;
  const double expo = 1.0 - s;
  for (std::size_t i = 0; i <= ext_idx; ++i) {
    if (t[i] > t_limit) break;
    tw.push_back(t[i]);
    yw.push_back(std::pow(std::max(X[i], 0.0), expo));
  }
  fit.window_count = tw.size();
  if (tw.size() < 3) return fit;

  const double n = static_cast<double>(tw.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < tw.size(); ++i) {
    st += tw[i];
    sy += yw[i];
    stt += tw[i] * tw[i];
    sty += tw[i] * yw[i];
  }
  const double denom = n * stt - st * st;
  fit.slope = (n * sty - st * sy) / denom;
  fit.intercept = (sy - fit.slope * st) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  const double mean = sy / n;
  for (std::size_t i = 0; i < tw.size(); ++i) {
    const double pred = fit.intercept + fit.slope * tw[i];
    ss_res += (yw[i] - pred) * (yw[i] - pred);
    ss_tot += (yw[i] - mean) * (yw[i] - mean);
  }
  fit.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;

  fit.max_second_difference = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < yw.size(); ++i)
    fit.max_second_difference =
        std::max(fit.max_second_difference, yw[i + 1] - 2.0 * yw[i] + yw[i - 1]);
  return fit;
}

// Sum of discrete outward fluxes at a vertex (the Kirchhoff defect).
inline double kirchhoff_residual(const AssemblyContext& ctx, const DiscreteState& x,
                                 int vertex_id) {
  const detail::VertexAssembly* va = nullptr;
  for (const auto& cand : ctx.verts)
    if (ctx.layout.vertex_ids[cand.pos] == vertex_id) va = &cand;
  if (!va) throw std::out_of_range("unknown vertex id " + std::to_string(vertex_id));
  double sum = 0.0;
  for (std::size_t n = 0; n < va->junction.edge_order.size(); ++n) {
    const Eigen::VectorXd& w = x.w[va->edge_pos[n]];
    const EdgeMesh& em = ctx.meshes->edge_mesh(va->junction.edge_order[n]);
    const int node = va->endpoint_node[n];
    const double slope = (node == 0)
                             ? (w[0] - w[1]) / (em.nodes[1] - em.nodes[0])
                             : (w[node] - w[node - 1]) / (em.nodes[node] - em.nodes[node - 1]);
    sum += flux_eval(ctx.model->edge_flux, slope);
  }
  return sum;
}

// --- error norms (used by the convergence studies) --------------------------------

namespace detail {

struct TriQuadPoint {
  double b0, b1, b2, weight;  // barycentric coordinates; weight scales area
};

// Degree-4 rule (6 points) for error integrals against smooth references.
inline const std::array<TriQuadPoint, 6>& tri_quad_degree4() {
  static const std::array<TriQuadPoint, 6> pts = {{
      {0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011},
      {0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011},
      {0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011},
      {0.816847572980459, 0.091576213509771, 0.091576213509771, 0.109951743655322},
      {0.091576213509771, 0.816847572980459, 0.091576213509771, 0.109951743655322},
      {0.091576213509771, 0.091576213509771, 0.816847572980459, 0.109951743655322},
  }};
  return pts;
}

}  // namespace detail

// L2 distance between the P1 field on subdomain `subdomain_id` and a smooth
// reference, integrated with a degree-4 rule.
template <class Fn>
inline double l2_error_subdomain(const AssemblyContext& ctx, const DiscreteState& x,
                                 int subdomain_id, Fn&& reference) {
  const int pos = ctx.layout.subdomain_pos.at(subdomain_id);
  const SubdomainMesh& mesh = ctx.meshes->subdomain_mesh(subdomain_id);
  const Eigen::VectorXd& u = x.u[pos];
  double err2 = 0.0;
  for (const auto& el : ctx.subs[pos].tris) {
    const Vec2 &p0 = mesh.nodes[el.n[0]], &p1 = mesh.nodes[el.n[1]], &p2 = mesh.nodes[el.n[2]];
    for (const auto& q : detail::tri_quad_degree4()) {
      const Vec2 xq = q.b0 * p0 + q.b1 * p1 + q.b2 * p2;
      const double uh = q.b0 * u[el.n[0]] + q.b1 * u[el.n[1]] + q.b2 * u[el.n[2]];
      const double diff = uh - reference(xq);
      err2 += el.area * q.weight * diff * diff;
    }
  }
  return std::sqrt(err2);
}

// L2 distance between the P1 edge field and a smooth reference of arclength.
template <class Fn>
inline double l2_error_edge(const AssemblyContext& ctx, const DiscreteState& x, int edge_id,
                            Fn&& reference) {
  const int pos = ctx.layout.edge_pos.at(edge_id);
  const EdgeMesh& mesh = ctx.meshes->edge_mesh(edge_id);
  const Eigen::VectorXd& w = x.w[pos];
  static const std::array<std::pair<double, double>, 3> rule = {{
      {0.5 - 0.5 * std::sqrt(0.6), 5.0 / 18.0},
      {0.5, 8.0 / 18.0},
      {0.5 + 0.5 * std::sqrt(0.6), 5.0 / 18.0},
  }};
  double err2 = 0.0;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const double h = mesh.nodes[c + 1] - mesh.nodes[c];
    for (const auto& [xi, weight] : rule) {
      const double sq = mesh.nodes[c] + xi * h;
      const double wh = (1.0 - xi) * w[c] + xi * w[c + 1];
      const double diff = wh - reference(sq);
      err2 += h * weight * diff * diff;
    }
  }
  return std::sqrt(err2);
}

}  // namespace netdiff
