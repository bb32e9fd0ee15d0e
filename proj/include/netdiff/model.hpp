#pragma once

// Constitutive laws and coupling data for the network-coupled
// reaction-diffusion model.
//
// Flux laws are gradient flows of a convex potential: either the pure
// power-law kappa(g) = |g|^(p-2) g (potential |g|^p / p) or the same with an
// added linear part.  A small regularization epsilon keeps the Jacobian
// bounded for p > 2; with epsilon = 0 the Jacobian at gradient zero is
// genuinely degenerate and evaluation reports it.
//
// Reaction laws are monotone with f(0) = 0: zero, linear c*s, or the odd
// power c*|s|^(sigma-2)*s used in the finite-time extinction studies.
//
// CouplingCoefficients holds the exchange data keyed by incidence:
//   alpha, beta  : (subdomain, edge) Robin exchange pairs,
//   gamma        : (vertex, from-edge, to-edge) junction transfer rates,
//   delta, lambda: (vertex, edge) vertex absorption / release rates.
// check_assumptions() verifies the structural hypotheses the well-posedness
// theory rests on (growth bounds on the reactions, positivity, and the
// per-vertex inequality  delta_j + sum_m gamma_{j->m} >= sum_m gamma_{m->j}).

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "netdiff/geometry.hpp"

namespace netdiff {

enum class FluxVariant { pure_power, linear_plus_power };

struct FluxLaw {
  double p = 2.0;                               // power index, p >= 2
  FluxVariant variant = FluxVariant::pure_power;
  double epsilon = 1e-8;                        // Jacobian regularization
};

namespace detail {

// (epsilon^2 + |g|^2)^((p-2)/2); the scalar weight in front of g.
inline double flux_weight(const FluxLaw& law, double g_sq) {
  const double s = law.epsilon * law.epsilon + g_sq;
  if (s == 0.0) return (law.p == 2.0) ? 1.0 : 0.0;
  return std::pow(s, 0.5 * (law.p - 2.0));
}

inline void require_nondegenerate(const FluxLaw& law, double g_sq) {
  if (law.epsilon == 0.0 && law.p > 2.0 && g_sq == 0.0)
    throw std::domain_error(
        "flux law degenerate at gradient zero (p > 2 with epsilon = 0); "
        "set a positive epsilon to regularize");
}

}  // namespace detail

// --- 2D flux (subdomain diffusion) ---------------------------------------

inline Vec2 flux_eval(const FluxLaw& law, const Vec2& g) {
  const double w = detail::flux_weight(law, g.squaredNorm());
  Vec2 out = w * g;
  if (law.variant == FluxVariant::linear_plus_power) out += g;
  return out;
}

inline Eigen::Matrix2d flux_jacobian(const FluxLaw& law, const Vec2& g) {
  const double g_sq = g.squaredNorm();
  detail::require_nondegenerate(law, g_sq);
  const double s = law.epsilon * law.epsilon + g_sq;
  Eigen::Matrix2d out;
  if (s == 0.0) {
    // p == 2 with epsilon == 0: the weight is identically 1.
    out = Eigen::Matrix2d::Identity();
  } else {
    const double w = std::pow(s, 0.5 * (law.p - 2.0));
    const double dw = (law.p - 2.0) * std::pow(s, 0.5 * (law.p - 4.0));
    out = w * Eigen::Matrix2d::Identity() + dw * (g * g.transpose());
  }
  if (law.variant == FluxVariant::linear_plus_power) out += Eigen::Matrix2d::Identity();
  return out;
}

// Convex potential with flux_eval as exact gradient:
//   pure_power:        ((eps^2+|g|^2)^(p/2) - eps^p) / p
//   linear_plus_power: the same plus |g|^2 / 2.
inline double antiderivative_eval(const FluxLaw& law, const Vec2& g) {
  const double s = law.epsilon * law.epsilon + g.squaredNorm();
  const double eps_p = (law.epsilon == 0.0) ? 0.0 : std::pow(law.epsilon, law.p);
  double out = (std::pow(s, 0.5 * law.p) - eps_p) / law.p;
  if (law.variant == FluxVariant::linear_plus_power) out += 0.5 * g.squaredNorm();
  return out;
}

// --- 1D flux (edge diffusion) ---------------------------------------------

inline double flux_eval(const FluxLaw& law, double g) {
  const double w = detail::flux_weight(law, g * g);
  double out = w * g;
  if (law.variant == FluxVariant::linear_plus_power) out += g;
  return out;
}

inline double flux_jacobian(const FluxLaw& law, double g) {
  const double g_sq = g * g;
  detail::require_nondegenerate(law, g_sq);
  const double s = law.epsilon * law.epsilon + g_sq;
  double out;
  if (s == 0.0) {
    out = 1.0;
  } else {
    out = std::pow(s, 0.5 * (law.p - 2.0)) +
          (law.p - 2.0) * std::pow(s, 0.5 * (law.p - 4.0)) * g_sq;
  }
  if (law.variant == FluxVariant::linear_plus_power) out += 1.0;
  return out;
}

inline double antiderivative_eval(const FluxLaw& law, double g) {
  const double s = law.epsilon * law.epsilon + g * g;
  const double eps_p = (law.epsilon == 0.0) ? 0.0 : std::pow(law.epsilon, law.p);
  double out = (std::pow(s, 0.5 * law.p) - eps_p) / law.p;
  if (law.variant == FluxVariant::linear_plus_power) out += 0.5 * g * g;
  return out;
}

// --- Reaction laws ----------------------------------------------------------

enum class ReactionKind { zero, linear, power };

struct ReactionLaw {
  ReactionKind kind = ReactionKind::zero;
  double coefficient = 0.0;      // c >= 0
  double exponent = 2.0;         // sigma in c*|s|^(sigma-2)*s (power kind only)
};

inline double reaction_eval(const ReactionLaw& law, double s) {
  switch (law.kind) {
    case ReactionKind::zero:
      return 0.0;
    case ReactionKind::linear:
      return law.coefficient * s;
    case ReactionKind::power:
      if (s == 0.0) return 0.0;
      return law.coefficient * std::pow(std::abs(s), law.exponent - 2.0) * s;
  }
  return 0.0;
}

// Derivative of the reaction.  For the power kind with sigma < 2 the true
// derivative blows up at s = 0; we return 0 there by convention and floor |s|
// in the derivative only, which keeps Newton's tangent finite without
// touching the residual.
inline double reaction_derivative(const ReactionLaw& law, double s) {
  switch (law.kind) {
    case ReactionKind::zero:
      return 0.0;
    case ReactionKind::linear:
      return law.coefficient;
    case ReactionKind::power: {
      if (s == 0.0) return (law.exponent == 2.0) ? law.coefficient : 0.0;
      const double a = std::max(std::abs(s), 1e-12);
      return law.coefficient * (law.exponent - 1.0) * std::pow(a, law.exponent - 2.0);
    }
  }
  return 0.0;
}

// Growth exponent q with |f(s)| <= c (1 + |s|^q), used by the assumption
// checks: 0 for the zero law, 1 for linear, sigma - 1 for the power law.
inline double reaction_growth_exponent(const ReactionLaw& law) {
  switch (law.kind) {
    case ReactionKind::zero:
      return 0.0;
    case ReactionKind::linear:
      return 1.0;
    case ReactionKind::power:
      return law.exponent - 1.0;
  }
  return 0.0;
}

// --- Coupling coefficients --------------------------------------------------

struct CouplingCoefficients {
  // Robin exchange across (subdomain i, edge j) incidence pairs.
  std::map<std::pair<int, int>, double> alpha;  // edge -> subdomain gain
  std::map<std::pair<int, int>, double> beta;   // subdomain -> edge gain
  // Junction transfer rates gamma[(vertex k, from edge m, to edge j)].
  std::map<std::tuple<int, int, int>, double> gamma;
  // Vertex absorption / release rates on (vertex k, edge j) pairs.
  std::map<std::pair<int, int>, double> delta;
  std::map<std::pair<int, int>, double> lambda;

  double alpha_at(int subdomain, int edge) const { return required(alpha, subdomain, edge, "alpha"); }
  double beta_at(int subdomain, int edge) const { return required(beta, subdomain, edge, "beta"); }
  double gamma_at(int vertex, int from_edge, int to_edge) const {
    auto it = gamma.find({vertex, from_edge, to_edge});
    return it == gamma.end() ? 0.0 : it->second;
  }
  double delta_at(int vertex, int edge) const { return optional(delta, vertex, edge); }
  double lambda_at(int vertex, int edge) const { return optional(lambda, vertex, edge); }

 private:
  static double required(const std::map<std::pair<int, int>, double>& m, int a, int b,
                         const char* name) {
    auto it = m.find({a, b});
    if (it == m.end()) {
      std::ostringstream msg;
      msg << "coefficient " << name << " missing for pair (" << a << ", " << b << ")";
      throw std::out_of_range(msg.str());
    }
    return it->second;
  }
  static double optional(const std::map<std::pair<int, int>, double>& m, int a, int b) {
    auto it = m.find({a, b});
    return it == m.end() ? 0.0 : it->second;
  }
};

struct ModelSpec {
  FluxLaw subdomain_flux;                // kappa
  FluxLaw edge_flux;                     // eta
  ReactionLaw subdomain_reaction;        // f
  ReactionLaw edge_reaction;             // g
  CouplingCoefficients coupling;
};

// A vertex is populated when it carries dynamic state, i.e. some absorption
// or release rate is positive on its incident edges.
inline bool is_populated(const ModelSpec& model, const PartitionedDomain& domain, int vertex_id) {
  for (const auto& inc : edges_at_vertex(domain, vertex_id))
    if (model.coupling.delta_at(vertex_id, inc.edge_id) > 0.0 ||
        model.coupling.lambda_at(vertex_id, inc.edge_id) > 0.0)
      return true;
  return false;
}

// Verify the structural hypotheses of the model against a concrete domain.
// p is the flux power index the growth bounds refer to.  Returns one message
// per violated assumption, with the offending location spelled out.
inline std::vector<std::string> check_assumptions(const ModelSpec& model,
                                                  const PartitionedDomain& domain, double p) {
  std::vector<std::string> out;
  auto report = [&out](const std::string& msg) { out.push_back(msg); };
  std::ostringstream msg;
  auto flush = [&]() {
    report(msg.str());
    msg.str("");
    msg.clear();
  };

  // Flux laws: power index at least 2, shared between bulk and edges.
  if (!(p >= 2.0)) {
    msg << "power index p = " << p << " must satisfy p >= 2";
    flush();
  }
  if (model.subdomain_flux.p != p) {
    msg << "subdomain flux power " << model.subdomain_flux.p << " differs from p = " << p;
    flush();
  }
  if (model.edge_flux.p != p) {
    msg << "edge flux power " << model.edge_flux.p << " differs from p = " << p;
    flush();
  }
  if (model.subdomain_flux.epsilon < 0.0 || model.edge_flux.epsilon < 0.0) {
    msg << "flux regularization epsilon must be non-negative";
    flush();
  }

  // Reactions: monotone with admissible growth.
  auto check_reaction = [&](const ReactionLaw& law, const char* name, double bound,
                            const char* bound_text) {
    if (law.coefficient < 0.0) {
      msg << name << " reaction coefficient " << law.coefficient << " must be non-negative";
      flush();
    }
    if (law.kind == ReactionKind::power && !(law.exponent > 1.0)) {
      msg << name << " power reaction exponent " << law.exponent
          << " must exceed 1 for a monotone law";
      flush();
    }
    const double growth = reaction_growth_exponent(law);
    if (!(growth < bound)) {
      msg << name << " reaction growth exponent " << growth << " violates " << bound_text
          << " = " << bound;
      flush();
    }
  };
  const double q_bound = 2.0 * (p - 1.0) * (p - 1.0) / p + 2.0;
  const double r_bound = (3.0 * p - 2.0) * (p - 1.0) / p + 2.0;
  check_reaction(model.subdomain_reaction, "subdomain", q_bound, "q < 2(p-1)^2/p + 2");
  check_reaction(model.edge_reaction, "edge", r_bound, "r < (3p-2)(p-1)/p + 2");

  // Robin pairs: strictly positive on every incidence, nowhere else.
  for (const auto& e : domain.edges) {
    for (int sid : e.adjacent_subdomains) {
      for (const auto* coeffs : {&model.coupling.alpha, &model.coupling.beta}) {
        const char* name = (coeffs == &model.coupling.alpha) ? "alpha" : "beta";
        auto it = coeffs->find({sid, e.id});
        if (it == coeffs->end()) {
          msg << name << "(" << sid << ", " << e.id << ") missing for incident pair";
          flush();
        } else if (!(it->second > 0.0)) {
          msg << name << "(" << sid << ", " << e.id << ") = " << it->second
              << " must be strictly positive";
          flush();
        }
      }
    }
  }
  auto incident = [&domain](int sid, int eid) {
    const Edge* e = domain.find_edge(eid);
    if (!e || !domain.find_subdomain(sid)) return false;
    return std::find(e->adjacent_subdomains.begin(), e->adjacent_subdomains.end(), sid) !=
           e->adjacent_subdomains.end();
  };
  for (const auto* coeffs : {&model.coupling.alpha, &model.coupling.beta}) {
    const char* name = (coeffs == &model.coupling.alpha) ? "alpha" : "beta";
    for (const auto& [key, value] : *coeffs)
      if (!incident(key.first, key.second)) {
        msg << name << "(" << key.first << ", " << key.second
            << ") given for a non-incident (subdomain, edge) pair";
        flush();
      }
  }

  // Vertex coefficients: non-negative, on incident pairs only, and per vertex
  // either all absorption/release rates vanish or all are strictly positive.
  auto vertex_incident = [&domain](int vid, int eid) {
    const Edge* e = domain.find_edge(eid);
    if (!e || !domain.find_vertex(vid)) return false;
    return e->source_vertex == vid || e->terminal_vertex == vid;
  };
  for (const auto* coeffs : {&model.coupling.delta, &model.coupling.lambda}) {
    const char* name = (coeffs == &model.coupling.delta) ? "delta" : "lambda";
    for (const auto& [key, value] : *coeffs) {
      if (!vertex_incident(key.first, key.second)) {
        msg << name << "(" << key.first << ", " << key.second
            << ") given for a non-incident (vertex, edge) pair";
        flush();
      }
      if (value < 0.0) {
        msg << name << "(" << key.first << ", " << key.second << ") = " << value
            << " must be non-negative";
        flush();
      }
    }
  }
  for (const auto& [key, value] : model.coupling.gamma) {
    const auto& [vid, from, to] = key;
    if (!vertex_incident(vid, from) || !vertex_incident(vid, to) || from == to) {
      msg << "gamma(" << vid << ", " << from << " -> " << to
          << ") must connect two distinct edges incident to the vertex";
      flush();
    }
    if (value < 0.0) {
      msg << "gamma(" << vid << ", " << from << " -> " << to << ") = " << value
          << " must be non-negative";
      flush();
    }
  }
  for (const auto& v : domain.vertices) {
    const auto incident_edges = edges_at_vertex(domain, v.id);
    int zero = 0, positive = 0;
    for (const auto& inc : incident_edges) {
      const double d = model.coupling.delta_at(v.id, inc.edge_id);
      const double l = model.coupling.lambda_at(v.id, inc.edge_id);
      if (d > 0.0 && l > 0.0)
        ++positive;
      else if (d == 0.0 && l == 0.0)
        ++zero;
      else {
        msg << "vertex " << v.id << ", edge " << inc.edge_id
            << ": delta and lambda must vanish or be positive together";
        flush();
      }
    }
    if (zero > 0 && positive > 0) {
      msg << "vertex " << v.id << ": mixes populated and unpopulated incident edges "
          << "(delta/lambda must be all zero or all positive at a vertex)";
      flush();
    }

    // Per-edge balance: delta_j + sum_{m != j} gamma_{j->m} >= sum_{m != j} gamma_{m->j}.
    for (const auto& inc : incident_edges) {
      double outgoing = model.coupling.delta_at(v.id, inc.edge_id);
      double incoming = 0.0;
      for (const auto& other : incident_edges) {
        if (other.edge_id == inc.edge_id) continue;
        outgoing += model.coupling.gamma_at(v.id, inc.edge_id, other.edge_id);
        incoming += model.coupling.gamma_at(v.id, other.edge_id, inc.edge_id);
      }
      if (outgoing < incoming - 1e-14 * std::max(1.0, incoming)) {
        msg << "vertex " << v.id << ", edge " << inc.edge_id << ": balance inequality fails ("
            << outgoing << " < " << incoming
            << "); delta + outgoing gamma must dominate incoming gamma";
        flush();
      }
    }
  }

  return out;
}

}  // namespace netdiff
