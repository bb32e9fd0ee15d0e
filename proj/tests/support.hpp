#pragma once

// Shared fixtures for the unit and acceptance suites: small reference
// domains with hand-checked areas, and helpers that populate coupling
// coefficient tables uniformly.

#include <netdiff/geometry.hpp>
#include <netdiff/model.hpp>

namespace support {

using netdiff::BoundaryLeg;
using netdiff::Edge;
using netdiff::ModelSpec;
using netdiff::PartitionedDomain;
using netdiff::Subdomain;
using netdiff::Vec2;
using netdiff::Vertex;

inline void fill_lengths(PartitionedDomain& domain) {
  for (auto& e : domain.edges) {
    const Vec2 a = domain.vertex(e.source_vertex).position;
    const Vec2 b = domain.vertex(e.terminal_vertex).position;
    e.length = (b - a).norm();
  }
}

// Unit square, one subdomain, all four sides are network edges.
//   4 (0,1) --- 3 (1,1)
//   |               |
//   1 (0,0) --- 2 (1,0)
inline PartitionedDomain unit_square() {
  PartitionedDomain d;
  d.vertices = {{1, Vec2(0, 0)}, {2, Vec2(1, 0)}, {3, Vec2(1, 1)}, {4, Vec2(0, 1)}};
  d.edges = {{1, 1, 2, 0.0, {1}}, {2, 2, 3, 0.0, {1}}, {3, 3, 4, 0.0, {1}}, {4, 4, 1, 0.0, {1}}};
  d.subdomains = {{1, {{1, false}, {2, false}, {3, false}, {4, false}}}};
  fill_lengths(d);
  return d;
}

// Two unit squares sharing the interior edge x = 1; the shared edge carries
// Robin exchange with both squares.
//   6 (0,1) -- 5 (1,1) -- 4 (2,1)
//   |            |           |
//   1 (0,0) -- 2 (1,0) -- 3 (2,0)
inline PartitionedDomain two_squares() {
  PartitionedDomain d;
  d.vertices = {{1, Vec2(0, 0)}, {2, Vec2(1, 0)}, {3, Vec2(2, 0)},
                {4, Vec2(2, 1)}, {5, Vec2(1, 1)}, {6, Vec2(0, 1)}};
  d.edges = {{1, 1, 2, 0.0, {1}},    {2, 2, 3, 0.0, {2}}, {3, 3, 4, 0.0, {2}},
             {4, 4, 5, 0.0, {2}},    {5, 5, 6, 0.0, {1}}, {6, 6, 1, 0.0, {1}},
             {7, 2, 5, 0.0, {1, 2}}};
  d.subdomains = {{1, {{1, false}, {7, false}, {5, false}, {6, false}}},
                  {2, {{2, false}, {3, false}, {4, false}, {7, true}}}};
  fill_lengths(d);
  return d;
}

// Pentagon hull with an interior path splitting it into three subdomains:
// a triangle and two quadrilateral-ish regions.  7 vertices, 9 edges,
// 3 subdomains; total area 21.
inline PartitionedDomain figure_network() {
  PartitionedDomain d;
  d.vertices = {{1, Vec2(2, 2)},                                       // interior junction X
                {2, Vec2(0, 0)},  {3, Vec2(4, 0)}, {4, Vec2(5, 3)},    // hull corners
                {5, Vec2(2, 5)},  {6, Vec2(-1, 3)},
                {7, Vec2(2.5, 3.5)}};                                  // interior junction Y
  d.edges = {{1, 2, 3, 0.0, {1}},     // hull bottom
             {2, 3, 4, 0.0, {3}},     // hull right
             {3, 4, 5, 0.0, {3}},     // hull top right
             {4, 5, 6, 0.0, {2}},     // hull top left
             {5, 6, 2, 0.0, {2}},     // hull left
             {6, 2, 1, 0.0, {1, 2}},  // interior: P1 - X
             {7, 1, 7, 0.0, {2, 3}},  // interior: X - Y
             {8, 7, 5, 0.0, {2, 3}},  // interior: Y - P4
             {9, 1, 3, 0.0, {1, 3}}}; // interior: X - P2
  d.subdomains = {
      {1, {{1, false}, {9, true}, {6, true}}},                          // triangle, area 4
      {2, {{6, false}, {7, false}, {8, false}, {4, false}, {5, false}}},// left, area 9.25
      {3, {{9, false}, {2, false}, {3, false}, {8, true}, {7, true}}}}; // right, area 7.75
  fill_lengths(d);
  return d;
}

// Uniform Robin coefficients on every (subdomain, incident edge) pair.
inline void set_all_robin(ModelSpec& model, const PartitionedDomain& domain, double alpha,
                          double beta) {
  for (const auto& e : domain.edges)
    for (int sid : e.adjacent_subdomains) {
      model.coupling.alpha[{sid, e.id}] = alpha;
      model.coupling.beta[{sid, e.id}] = beta;
    }
}

// gamma(v, j, m) = value for every ordered pair of distinct edges at every
// vertex (symmetric by construction).
inline void set_symmetric_gamma(ModelSpec& model, const PartitionedDomain& domain, double value) {
  for (const auto& v : domain.vertices) {
    const auto incident = netdiff::edges_at_vertex(domain, v.id);
    for (const auto& j : incident)
      for (const auto& m : incident)
        if (j.edge_id != m.edge_id) model.coupling.gamma[{v.id, j.edge_id, m.edge_id}] = value;
  }
}

// Populate every vertex with uniform delta and lambda on all incident edges.
inline void set_all_vertex_exchange(ModelSpec& model, const PartitionedDomain& domain,
                                    double delta, double lambda) {
  for (const auto& v : domain.vertices)
    for (const auto& j : netdiff::edges_at_vertex(domain, v.id)) {
      model.coupling.delta[{v.id, j.edge_id}] = delta;
      model.coupling.lambda[{v.id, j.edge_id}] = lambda;
    }
}

}  // namespace support
