#pragma once

// Planar polygonal domain partitioned by an embedded metric graph.
//
// The geometry is always ingested, never inferred: vertices carry explicit
// coordinates, edges are straight segments between two vertices with a stored
// length, and each subdomain is described by a closed loop of edge traversals.
// validate_geometry() checks the data against the structural requirements
// (stored lengths consistent with coordinates, minimum vertex degree, closed
// simple loops, edges meeting only at vertices, subdomains tiling the hull)
// and returns human-readable violation descriptions instead of throwing, so a
// driver can report all problems at once.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace netdiff {

using Vec2 = Eigen::Vector2d;

struct Vertex {
  int id = -1;
  Vec2 position = Vec2::Zero();
};

struct Edge {
  int id = -1;
  int source_vertex = -1;
  int terminal_vertex = -1;
  double length = 0.0;
  std::vector<int> adjacent_subdomains;  // one entry (hull edge) or two (interface)
};

// One traversal step in a subdomain boundary loop.  reversed == false means
// the edge is walked from its source vertex to its terminal vertex.
struct BoundaryLeg {
  int edge_id = -1;
  bool reversed = false;
};

struct Subdomain {
  int id = -1;
  std::vector<BoundaryLeg> boundary_loop;
};

struct PartitionedDomain {
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<Subdomain> subdomains;

  const Vertex* find_vertex(int id) const {
    for (const auto& v : vertices)
      if (v.id == id) return &v;
    return nullptr;
  }
  const Edge* find_edge(int id) const {
    for (const auto& e : edges)
      if (e.id == id) return &e;
    return nullptr;
  }
  const Subdomain* find_subdomain(int id) const {
    for (const auto& s : subdomains)
      if (s.id == id) return &s;
    return nullptr;
  }

  const Vertex& vertex(int id) const {
    const Vertex* v = find_vertex(id);
    if (!v) throw std::out_of_range("unknown vertex id " + std::to_string(id));
    return *v;
  }
  const Edge& edge(int id) const {
    const Edge* e = find_edge(id);
    if (!e) throw std::out_of_range("unknown edge id " + std::to_string(id));
    return *e;
  }
  const Subdomain& subdomain(int id) const {
    const Subdomain* s = find_subdomain(id);
    if (!s) throw std::out_of_range("unknown subdomain id " + std::to_string(id));
    return *s;
  }
};

enum class EndpointRole { source, terminal };

struct EdgeAtVertex {
  int edge_id = -1;
  EndpointRole role = EndpointRole::source;
};

// Incident edges of a vertex in ascending edge-id order.  A self-loop (both
// endpoints at the vertex) produces two entries; validation rejects such
// edges separately.
inline std::vector<EdgeAtVertex> edges_at_vertex(const PartitionedDomain& domain, int vertex_id) {
  domain.vertex(vertex_id);  // throws for unknown ids
  std::vector<EdgeAtVertex> out;
  for (const auto& e : domain.edges) {
    if (e.source_vertex == vertex_id) out.push_back({e.id, EndpointRole::source});
    if (e.terminal_vertex == vertex_id) out.push_back({e.id, EndpointRole::terminal});
  }
  std::sort(out.begin(), out.end(),
            [](const EdgeAtVertex& a, const EdgeAtVertex& b) { return a.edge_id < b.edge_id; });
  return out;
}

inline int vertex_degree(const PartitionedDomain& domain, int vertex_id) {
  return static_cast<int>(edges_at_vertex(domain, vertex_id).size());
}

// Edge ids appearing in the subdomain's boundary loop, ascending.
inline std::vector<int> edges_of_subdomain(const PartitionedDomain& domain, int subdomain_id) {
  const Subdomain& s = domain.subdomain(subdomain_id);
  std::vector<int> ids;
  for (const auto& leg : s.boundary_loop) ids.push_back(leg.edge_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Point on an edge at arclength s from the source vertex.
inline Vec2 point_on_edge(const PartitionedDomain& domain, const Edge& e, double s) {
  const Vec2 a = domain.vertex(e.source_vertex).position;
  const Vec2 b = domain.vertex(e.terminal_vertex).position;
  const double t = (e.length > 0.0) ? s / e.length : 0.0;
  return a + t * (b - a);
}

namespace detail {

inline int loop_leg_start(const PartitionedDomain& d, const BoundaryLeg& leg) {
  const Edge& e = d.edge(leg.edge_id);
  return leg.reversed ? e.terminal_vertex : e.source_vertex;
}
inline int loop_leg_end(const PartitionedDomain& d, const BoundaryLeg& leg) {
  const Edge& e = d.edge(leg.edge_id);
  return leg.reversed ? e.source_vertex : e.terminal_vertex;
}

inline double shoelace_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Do the open segments (a,b) and (c,d) intersect?  Shared endpoints do not
// count; collinear overlap of positive length does.
inline bool open_segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d,
                                    double tol) {
  const double d1 = cross2(b - a, c - a);
  const double d2 = cross2(b - a, d - a);
  const double d3 = cross2(d - c, a - c);
  const double d4 = cross2(d - c, b - c);
  if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) {
    if ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol)) return true;
  }
  // Collinear cases: check 1D overlap along the dominant axis.
  auto on_open_segment = [tol](const Vec2& p, const Vec2& q, const Vec2& r) {
    if (std::abs(cross2(q - p, r - p)) > tol) return false;
    const double t = (q - p).dot(r - p) / (q - p).squaredNorm();
    return t > 1e-12 && t < 1.0 - 1e-12;
  };
  if (on_open_segment(a, b, c) || on_open_segment(a, b, d) || on_open_segment(c, d, a) ||
      on_open_segment(c, d, b))
    return true;
  return false;
}

// Is point r strictly inside the open segment (a,b)?
inline bool point_in_open_segment(const Vec2& a, const Vec2& b, const Vec2& r, double tol) {
  if (std::abs(cross2(b - a, r - a)) > tol) return false;
  const double t = (b - a).dot(r - a) / (b - a).squaredNorm();
  return t > 1e-12 && t < 1.0 - 1e-12;
}

}  // namespace detail

// Ordered corner vertex ids of a subdomain's polygon (start vertex of each
// leg in traversal order).  Requires a structurally closed loop.
inline std::vector<int> polygon_vertices(const PartitionedDomain& domain, const Subdomain& s) {
  std::vector<int> ids;
  for (const auto& leg : s.boundary_loop) ids.push_back(detail::loop_leg_start(domain, leg));
  return ids;
}

inline std::vector<Vec2> polygon_points(const PartitionedDomain& domain, const Subdomain& s) {
  std::vector<Vec2> pts;
  for (int vid : polygon_vertices(domain, s)) pts.push_back(domain.vertex(vid).position);
  return pts;
}

inline double subdomain_area(const PartitionedDomain& domain, const Subdomain& s) {
  return std::abs(detail::shoelace_area(polygon_points(domain, s)));
}

// Structural validation.  Returns one description per violation; an empty
// vector means the data is a consistent partitioned domain.  rel_tol bounds
// the allowed relative mismatch between stored edge lengths and endpoint
// distances.
inline std::vector<std::string> validate_geometry(const PartitionedDomain& domain,
                                                  double rel_tol = 1e-12) {
  std::vector<std::string> out;
  auto report = [&out](const std::string& msg) { out.push_back(msg); };

  // Duplicate ids make later lookups ambiguous; report and bail out early.
  {
    std::set<int> seen;
    for (const auto& v : domain.vertices)
      if (!seen.insert(v.id).second) report("vertex " + std::to_string(v.id) + ": duplicate id");
    seen.clear();
    for (const auto& e : domain.edges)
      if (!seen.insert(e.id).second) report("edge " + std::to_string(e.id) + ": duplicate id");
    seen.clear();
    for (const auto& s : domain.subdomains)
      if (!seen.insert(s.id).second)
        report("subdomain " + std::to_string(s.id) + ": duplicate id");
    if (!out.empty()) return out;
  }

  // Reference integrity.  Broken references poison the geometric checks, so
  // collect them first and stop if any are found.
  for (const auto& e : domain.edges) {
    if (!domain.find_vertex(e.source_vertex))
      report("edge " + std::to_string(e.id) + ": unknown source vertex " +
             std::to_string(e.source_vertex));
    if (!domain.find_vertex(e.terminal_vertex))
      report("edge " + std::to_string(e.id) + ": unknown terminal vertex " +
             std::to_string(e.terminal_vertex));
    for (int sid : e.adjacent_subdomains)
      if (!domain.find_subdomain(sid))
        report("edge " + std::to_string(e.id) + ": unknown adjacent subdomain " +
               std::to_string(sid));
  }
  for (const auto& s : domain.subdomains)
    for (const auto& leg : s.boundary_loop)
      if (!domain.find_edge(leg.edge_id))
        report("subdomain " + std::to_string(s.id) + ": loop references unknown edge " +
               std::to_string(leg.edge_id));
  if (!out.empty()) return out;

  double scale = 0.0;
  for (const auto& v : domain.vertices) scale = std::max(scale, v.position.norm());
  scale = std::max(scale, 1.0);
  const double geom_tol = 1e-12 * scale * scale;  // tolerance for cross products

  // Per-edge checks: straight segments of consistent positive length.
  for (const auto& e : domain.edges) {
    if (e.source_vertex == e.terminal_vertex)
      report("edge " + std::to_string(e.id) + ": source and terminal vertex coincide (id " +
             std::to_string(e.source_vertex) + ")");
    const double dist =
        (domain.vertex(e.terminal_vertex).position - domain.vertex(e.source_vertex).position)
            .norm();
    if (!(e.length > 0.0))
      report("edge " + std::to_string(e.id) + ": non-positive stored length");
    else if (std::abs(e.length - dist) > rel_tol * std::max(e.length, dist)) {
      std::ostringstream msg;
      msg << "edge " << e.id << ": stored length " << e.length
          << " does not match endpoint distance " << dist
          << " (a curved edge cannot be represented)";
      report(msg.str());
    }
    if (e.adjacent_subdomains.empty() || e.adjacent_subdomains.size() > 2)
      report("edge " + std::to_string(e.id) + ": must touch one or two subdomains, lists " +
             std::to_string(e.adjacent_subdomains.size()));
    if (e.adjacent_subdomains.size() == 2 &&
        e.adjacent_subdomains[0] == e.adjacent_subdomains[1])
      report("edge " + std::to_string(e.id) + ": repeated adjacent subdomain");
  }

  // Vertices must join at least two edges.
  for (const auto& v : domain.vertices) {
    const int deg = vertex_degree(domain, v.id);
    if (deg < 2)
      report("vertex " + std::to_string(v.id) + ": degree " + std::to_string(deg) +
             " (every vertex must join at least 2 edges)");
  }

  // Edges may meet only at shared vertices: no interior crossings, and no
  // vertex sitting in the interior of an edge.
  for (std::size_t i = 0; i < domain.edges.size(); ++i) {
    const Edge& ei = domain.edges[i];
    const Vec2 a = domain.vertex(ei.source_vertex).position;
    const Vec2 b = domain.vertex(ei.terminal_vertex).position;
    for (std::size_t j = i + 1; j < domain.edges.size(); ++j) {
      const Edge& ej = domain.edges[j];
      const Vec2 c = domain.vertex(ej.source_vertex).position;
      const Vec2 d = domain.vertex(ej.terminal_vertex).position;
      const bool share_endpoint =
          ei.source_vertex == ej.source_vertex || ei.source_vertex == ej.terminal_vertex ||
          ei.terminal_vertex == ej.source_vertex || ei.terminal_vertex == ej.terminal_vertex;
      if (share_endpoint) {
        // Only an overlap of positive length can go wrong here.
        const int shared_id =
            (ei.source_vertex == ej.source_vertex || ei.source_vertex == ej.terminal_vertex)
                ? ei.source_vertex
                : ei.terminal_vertex;
        const Vec2 shared = domain.vertex(shared_id).position;
        const Vec2 other_i = (shared_id == ei.source_vertex) ? b : a;
        const Vec2 other_j = (shared_id == ej.source_vertex) ? d : c;
        if (std::abs(detail::cross2(other_i - shared, other_j - shared)) <= geom_tol &&
            (other_i - shared).dot(other_j - shared) > 0.0)
          report("edges " + std::to_string(ei.id) + " and " + std::to_string(ej.id) +
                 ": overlap along a shared direction");
      } else if (detail::open_segments_intersect(a, b, c, d, geom_tol)) {
        report("edges " + std::to_string(ei.id) + " and " + std::to_string(ej.id) +
               ": interiors intersect away from a shared vertex");
      }
    }
    for (const auto& v : domain.vertices) {
      if (v.id == ei.source_vertex || v.id == ei.terminal_vertex) continue;
      if (detail::point_in_open_segment(a, b, v.position, geom_tol))
        report("vertex " + std::to_string(v.id) + ": lies in the interior of edge " +
               std::to_string(ei.id));
    }
  }

  // Subdomain loops: closed, simple, consistent with edge adjacency lists.
  std::map<int, int> loop_use_count;  // edge id -> number of subdomain loops using it
  for (const auto& s : domain.subdomains) {
    const std::string tag = "subdomain " + std::to_string(s.id);
    if (s.boundary_loop.size() < 3) {
      report(tag + ": boundary loop has fewer than 3 legs");
      continue;
    }
    bool chain_ok = true;
    for (std::size_t k = 0; k < s.boundary_loop.size(); ++k) {
      const auto& cur = s.boundary_loop[k];
      const auto& nxt = s.boundary_loop[(k + 1) % s.boundary_loop.size()];
      if (detail::loop_leg_end(domain, cur) != detail::loop_leg_start(domain, nxt)) {
        report(tag + ": loop breaks between edge " + std::to_string(cur.edge_id) + " and edge " +
               std::to_string(nxt.edge_id));
        chain_ok = false;
      }
    }
    std::set<int> used;
    for (const auto& leg : s.boundary_loop) {
      if (!used.insert(leg.edge_id).second)
        report(tag + ": edge " + std::to_string(leg.edge_id) + " appears twice in the loop");
      ++loop_use_count[leg.edge_id];
      const Edge& e = domain.edge(leg.edge_id);
      if (std::find(e.adjacent_subdomains.begin(), e.adjacent_subdomains.end(), s.id) ==
          e.adjacent_subdomains.end())
        report(tag + ": edge " + std::to_string(leg.edge_id) +
               " does not list the subdomain as adjacent");
    }
    if (!chain_ok) continue;

    const std::vector<int> corners = polygon_vertices(domain, s);
    if (std::set<int>(corners.begin(), corners.end()).size() != corners.size())
      report(tag + ": boundary loop visits a vertex twice (not a simple polygon)");
    const std::vector<Vec2> pts = polygon_points(domain, s);
    if (std::abs(detail::shoelace_area(pts)) <= geom_tol)
      report(tag + ": boundary loop encloses zero area");
    // Non-adjacent boundary segments must not intersect.  Adjacent edge pairs
    // are covered by the global edge checks above.
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // closing pair shares a corner
        if (detail::open_segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n],
                                            geom_tol))
          report(tag + ": boundary polygon self-intersects");
      }
    }
  }

  // Every adjacency claimed by an edge must be backed by that subdomain's loop.
  for (const auto& e : domain.edges) {
    const int uses = loop_use_count.count(e.id) ? loop_use_count[e.id] : 0;
    if (uses != static_cast<int>(e.adjacent_subdomains.size()))
      report("edge " + std::to_string(e.id) + ": adjacent to " +
             std::to_string(e.adjacent_subdomains.size()) + " subdomain(s) but used by " +
             std::to_string(uses) + " boundary loop(s)");
  }
  if (!out.empty()) return out;

  // Hull edges (single adjacency) must chain into one closed loop, and the
  // subdomain areas must tile the hull polygon exactly.
  {
    std::vector<const Edge*> hull;
    for (const auto& e : domain.edges)
      if (e.adjacent_subdomains.size() == 1) hull.push_back(&e);
    std::map<int, std::vector<const Edge*>> at_vertex;
    for (const Edge* e : hull) {
      at_vertex[e->source_vertex].push_back(e);
      at_vertex[e->terminal_vertex].push_back(e);
    }
    bool chain_ok = !hull.empty();
    for (const auto& [vid, inc] : at_vertex)
      if (inc.size() != 2) {
        report("vertex " + std::to_string(vid) + ": external boundary does not pass through " +
               "cleanly (" + std::to_string(inc.size()) + " hull edges meet here)");
        chain_ok = false;
      }
    if (chain_ok) {
      // Walk the hull from an arbitrary edge and collect corner positions.
      std::set<int> visited;
      std::vector<Vec2> poly;
      const Edge* cur = hull.front();
      int at = cur->source_vertex;
      while (visited.insert(cur->id).second) {
        poly.push_back(domain.vertex(at).position);
        at = (cur->source_vertex == at) ? cur->terminal_vertex : cur->source_vertex;
        const Edge* next = nullptr;
        for (const Edge* cand : at_vertex[at])
          if (cand->id != cur->id) next = cand;
        cur = next;
      }
      if (visited.size() != hull.size()) {
        report("external boundary splits into several loops (" +
               std::to_string(visited.size()) + " of " + std::to_string(hull.size()) +
               " hull edges in one walk)");
      } else {
        const double hull_area = std::abs(detail::shoelace_area(poly));
        double tiled = 0.0;
        for (const auto& s : domain.subdomains) tiled += subdomain_area(domain, s);
        if (std::abs(hull_area - tiled) > 1e-10 * std::max(hull_area, tiled)) {
          std::ostringstream msg;
          msg << "subdomain areas sum to " << tiled << " but the external boundary encloses "
              << hull_area << " (subdomains must tile the domain)";
          report(msg.str());
        }
      }
    }
  }

  return out;
}

}  // namespace netdiff
