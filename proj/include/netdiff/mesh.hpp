#pragma once

// Conforming discretization of a partitioned domain.
//
// Every geometry edge gets a uniform 1D mesh; every subdomain gets a
// triangulation whose boundary nodes are exactly the edge-mesh nodes of the
// edges in its loop, so traces line up node-for-node (conformity is a build
// postcondition, not an assumption).  Two generators are available:
//
//  * structured: axis-aligned rectangles are filled with a tensor grid split
//    into right triangles (max angle 90 degrees, which preserves the discrete
//    maximum principle),
//  * delaunay: Bowyer-Watson triangulation of the boundary nodes plus a
//    hexagonal interior point set, filtered to the polygon.
//
// Both paths run the same postcondition checks (positive areas, exact tiling
// of the polygon area, manifold boundary matching the edge meshes, diameter
// bound); the Delaunay path retries with a denser interior set before giving
// up.  TraceMap and VertexTrace record the node identifications used by the
// coupling terms; lift_edge_values / scatter_to_edge are the corresponding
// prolongation and restriction (exact transposes of each other).

#include <Eigen/Core>
#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "netdiff/geometry.hpp"

namespace netdiff {

struct EdgeMesh {
  int edge_id = -1;
  std::vector<double> nodes;  // arclength positions, ascending, from 0 to length
  int cell_count() const { return static_cast<int>(nodes.size()) - 1; }
};

// One boundary segment of a subdomain mesh lying on a geometry edge; node
// indices refer to the subdomain mesh, ordered by increasing arclength.
struct BoundaryFacet {
  int a = -1;
  int b = -1;
};

struct SubdomainMesh {
  int subdomain_id = -1;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;                // counter-clockwise
  std::map<int, std::vector<BoundaryFacet>> edge_facets;    // geometry edge id -> facets
  double max_diameter = 0.0;
};

struct TraceMap {
  // (subdomain id, edge id) -> subdomain node index of each edge-mesh node.
  std::map<std::pair<int, int>, std::vector<int>> nodes;

  bool has(int subdomain, int edge) const { return nodes.count({subdomain, edge}) > 0; }
  const std::vector<int>& at(int subdomain, int edge) const {
    auto it = nodes.find({subdomain, edge});
    if (it == nodes.end())
      throw std::out_of_range("no trace for subdomain " + std::to_string(subdomain) +
                              ", edge " + std::to_string(edge));
    return it->second;
  }
};

struct VertexTrace {
  // (edge id, vertex id) -> node index in that edge's mesh (first or last).
  std::map<std::pair<int, int>, int> endpoint;

  int at(int edge, int vertex) const {
    auto it = endpoint.find({edge, vertex});
    if (it == endpoint.end())
      throw std::out_of_range("edge " + std::to_string(edge) + " does not end at vertex " +
                              std::to_string(vertex));
    return it->second;
  }
};

struct MeshOptions {
  enum class Generator { automatic, structured, delaunay };
  Generator generator = Generator::automatic;
};

struct MeshSet {
  std::vector<SubdomainMesh> subdomains;  // aligned with domain.subdomains
  std::vector<EdgeMesh> edges;            // aligned with domain.edges
  TraceMap trace;
  VertexTrace vertex_trace;
  double h = 0.0;                         // effective target size after clamping
  std::vector<std::string> notes;

  const SubdomainMesh& subdomain_mesh(int id) const {
    for (const auto& m : subdomains)
      if (m.subdomain_id == id) return m;
    throw std::out_of_range("no mesh for subdomain " + std::to_string(id));
  }
  const EdgeMesh& edge_mesh(int id) const {
    for (const auto& m : edges)
      if (m.edge_id == id) return m;
    throw std::out_of_range("no mesh for edge " + std::to_string(id));
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic value in [-0.5, 0.5) derived from two integers.
inline double hash_unit(std::uint64_t i, std::uint64_t j) {
  const std::uint64_t h = splitmix64(i * 0x51f15eedULL + j + 1);
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0) - 0.5;
}

inline bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& q) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x_cross = a.x() + (q.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (q.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

inline double distance_to_segment(const Vec2& a, const Vec2& b, const Vec2& q) {
  const Vec2 ab = b - a;
  const double t = std::clamp(ab.dot(q - a) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - q).norm();
}

inline double triangle_signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

inline double triangle_diameter(const Vec2& a, const Vec2& b, const Vec2& c) {
  return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
}

// --- Bowyer-Watson Delaunay --------------------------------------------------

struct BWTriangulation {
  std::vector<Vec2> points;                 // includes 3 trailing super-triangle points
  std::vector<std::array<int, 3>> triangles;
};

// Is q strictly inside the circumcircle of (CCW) triangle a,b,c?
inline bool in_circumcircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& q) {
  const double ax = a.x() - q.x(), ay = a.y() - q.y();
  const double bx = b.x() - q.x(), by = b.y() - q.y();
  const double cx = c.x() - q.x(), cy = c.y() - q.y();
  const double det = (ax * ax + ay * ay) * (bx * cy - cx * by) -
                     (bx * bx + by * by) * (ax * cy - cx * ay) +
                     (cx * cx + cy * cy) * (ax * by - bx * ay);
  return det > 0.0;
}

inline BWTriangulation bowyer_watson(const std::vector<Vec2>& input) {
  BWTriangulation tri;
  tri.points = input;

  Vec2 lo = input.front(), hi = input.front();
  for (const Vec2& p : input) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 mid = 0.5 * (lo + hi);
  const double span = std::max((hi - lo).maxCoeff(), 1e-12);
  const int s0 = static_cast<int>(tri.points.size());
  tri.points.push_back(mid + Vec2(-40.0 * span, -20.0 * span));
  tri.points.push_back(mid + Vec2(40.0 * span, -20.0 * span));
  tri.points.push_back(mid + Vec2(0.0, 40.0 * span));
  tri.triangles.push_back({s0, s0 + 1, s0 + 2});

  std::vector<std::array<int, 3>> next;
  std::map<std::pair<int, int>, int> hull_use;
  for (int ip = 0; ip < s0; ++ip) {
    const Vec2& q = tri.points[ip];
    next.clear();
    hull_use.clear();
    for (const auto& t : tri.triangles) {
      if (in_circumcircle(tri.points[t[0]], tri.points[t[1]], tri.points[t[2]], q)) {
        for (int k = 0; k < 3; ++k) {
          const int u = t[k], v = t[(k + 1) % 3];
          const auto key = std::minmax(u, v);
          ++hull_use[{key.first, key.second}];
          // remember orientation: store directed edge via a second map entry sign
        }
      } else {
        next.push_back(t);
      }
    }
    // Cavity boundary = edges used exactly once among removed triangles.
    // Recover orientation by checking the new triangle's signed area.
    for (const auto& t : tri.triangles) {
      if (!in_circumcircle(tri.points[t[0]], tri.points[t[1]], tri.points[t[2]], q)) continue;
      for (int k = 0; k < 3; ++k) {
        const int u = t[k], v = t[(k + 1) % 3];
        const auto key = std::minmax(u, v);
        if (hull_use[{key.first, key.second}] == 1) {
          std::array<int, 3> fresh = {u, v, ip};
          if (triangle_signed_area(tri.points[u], tri.points[v], q) < 0.0)
            fresh = {v, u, ip};
          next.push_back(fresh);
        }
      }
    }
    tri.triangles.swap(next);
  }
  return tri;
}

// --- Postcondition checks ----------------------------------------------------

// Verify mesh integrity against the boundary polyline (whose node indices in
// the mesh are 0..nb-1 in order).  Throws on violation unless collect is
// non-null, in which case messages are appended.
inline bool verify_subdomain_mesh(const SubdomainMesh& mesh, std::size_t boundary_count,
                                  double polygon_area, double target_h,
                                  std::vector<std::string>* collect) {
  std::vector<std::string> problems;
  double area_sum = 0.0;
  double scale = 1e-300;
  for (const Vec2& p : mesh.nodes) scale = std::max(scale, p.norm());
  scale = std::max(scale, 1.0);

  std::map<std::pair<int, int>, int> edge_use;
  double max_diam = 0.0;
  for (const auto& t : mesh.triangles) {
    const Vec2 &a = mesh.nodes[t[0]], &b = mesh.nodes[t[1]], &c = mesh.nodes[t[2]];
    const double area = triangle_signed_area(a, b, c);
    if (!(area > 1e-14 * scale * scale))
      problems.push_back("triangle with non-positive or vanishing area");
    area_sum += area;
    max_diam = std::max(max_diam, triangle_diameter(a, b, c));
    for (int k = 0; k < 3; ++k) {
      const auto key = std::minmax(t[k], t[(k + 1) % 3]);
      ++edge_use[{key.first, key.second}];
    }
  }
  if (std::abs(area_sum - polygon_area) > 1e-10 * std::max(polygon_area, 1e-300))
    problems.push_back("triangle areas do not tile the polygon (sum " +
                       std::to_string(area_sum) + " vs " + std::to_string(polygon_area) + ")");
  if (max_diam > 2.0 * target_h)
    problems.push_back("triangle diameter " + std::to_string(max_diam) +
                       " exceeds twice the target size " + std::to_string(target_h));

  // Boundary facets must be exactly the single-use edges.
  std::set<std::pair<int, int>> boundary;
  for (std::size_t i = 0; i < boundary_count; ++i) {
    const int u = static_cast<int>(i);
    const int v = static_cast<int>((i + 1) % boundary_count);
    const auto key = std::minmax(u, v);
    boundary.insert({key.first, key.second});
  }
  for (const auto& [key, uses] : edge_use) {
    const bool on_boundary = boundary.count(key) > 0;
    if (on_boundary && uses != 1)
      problems.push_back("boundary segment used by " + std::to_string(uses) + " triangles");
    if (!on_boundary && uses != 2)
      problems.push_back("interior mesh edge used by " + std::to_string(uses) + " triangles");
  }
  for (const auto& key : boundary)
    if (!edge_use.count(key))
      problems.push_back("boundary segment missing from the triangulation");

  if (collect)
    for (auto& p : problems) collect->push_back(p);
  return problems.empty();
}

}  // namespace detail

// Uniform 1D mesh of an edge with cells no longer than h.
inline EdgeMesh mesh_edge(const Edge& e, double h) {
  EdgeMesh m;
  m.edge_id = e.id;
  const int n = std::max(1, static_cast<int>(std::ceil(e.length / h - 1e-9)));
  m.nodes.resize(n + 1);
  for (int i = 0; i <= n; ++i) m.nodes[i] = e.length * static_cast<double>(i) / n;
  return m;
}

namespace detail {

// Position of an edge-mesh node in 2D, with endpoints snapped to the exact
// vertex coordinates.
inline Vec2 edge_node_position(const PartitionedDomain& domain, const Edge& e, double s) {
  if (s <= 0.0) return domain.vertex(e.source_vertex).position;
  if (s >= e.length) return domain.vertex(e.terminal_vertex).position;
  return point_on_edge(domain, e, s);
}

// Boundary polyline of one subdomain: node coordinates in traversal order,
// plus for each loop leg the polyline index of every edge-mesh node.
struct BoundaryWalk {
  std::vector<Vec2> points;
  // per leg: trace[m] = polyline index of edge-mesh node m (arclength order)
  std::vector<std::vector<int>> leg_trace;
};

inline BoundaryWalk walk_boundary(const PartitionedDomain& domain,
                                  const Subdomain& sub,
                                  const std::vector<EdgeMesh>& edge_meshes,
                                  const std::map<int, int>& edge_index) {
  BoundaryWalk walk;
  std::vector<int> leg_start;
  for (const auto& leg : sub.boundary_loop) {
    const Edge& e = domain.edge(leg.edge_id);
    const EdgeMesh& em = edge_meshes[edge_index.at(leg.edge_id)];
    const int n = em.cell_count();
    leg_start.push_back(static_cast<int>(walk.points.size()));
    // Append the first n nodes in traversal order; the closing node belongs
    // to the next leg.
    for (int k = 0; k < n; ++k) {
      const double s = leg.reversed ? em.nodes[n - k] : em.nodes[k];
      walk.points.push_back(edge_node_position(domain, e, s));
    }
  }
  const int total = static_cast<int>(walk.points.size());
  for (std::size_t li = 0; li < sub.boundary_loop.size(); ++li) {
    const auto& leg = sub.boundary_loop[li];
    const EdgeMesh& em = edge_meshes[edge_index.at(leg.edge_id)];
    const int n = em.cell_count();
    const int start = leg_start[li];
    std::vector<int> trace(n + 1);
    if (!leg.reversed) {
      for (int m = 0; m < n; ++m) trace[m] = start + m;
      trace[n] = (start + n) % total;
    } else {
      for (int m = 1; m <= n; ++m) trace[m] = start + (n - m);
      trace[0] = (start + n) % total;
    }
    walk.leg_trace.push_back(std::move(trace));
  }
  return walk;
}

// --- structured generator ----------------------------------------------------

// Attempt to mesh the subdomain as an axis-aligned rectangle with a tensor
// grid.  Returns false when the boundary is not recognized as such a
// rectangle with matching opposite-side node sets.
inline bool build_structured(const PartitionedDomain& domain, const Subdomain& sub,
                             const BoundaryWalk& walk, SubdomainMesh& mesh) {
  const std::vector<Vec2>& pts = walk.points;
  Vec2 lo = pts.front(), hi = pts.front();
  for (const Vec2& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double tol = 1e-10 * std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1.0});
  if (hi.x() - lo.x() < tol || hi.y() - lo.y() < tol) return false;

  std::vector<double> bottom, top, left, right;
  for (const Vec2& p : pts) {
    const bool on_b = std::abs(p.y() - lo.y()) <= tol;
    const bool on_t = std::abs(p.y() - hi.y()) <= tol;
    const bool on_l = std::abs(p.x() - lo.x()) <= tol;
    const bool on_r = std::abs(p.x() - hi.x()) <= tol;
    if (!(on_b || on_t || on_l || on_r)) return false;  // node off the rectangle
    if (on_b) bottom.push_back(p.x());
    if (on_t) top.push_back(p.x());
    if (on_l) left.push_back(p.y());
    if (on_r) right.push_back(p.y());
  }
  auto ascending = [](std::vector<double>& v) { std::sort(v.begin(), v.end()); };
  ascending(bottom);
  ascending(top);
  ascending(left);
  ascending(right);
  auto matches = [tol](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
  };
  if (!matches(bottom, top) || !matches(left, right)) return false;
  if (bottom.size() < 2 || left.size() < 2) return false;

  const std::vector<double>& xs = bottom;
  const std::vector<double>& ys = left;
  const int nc = static_cast<int>(xs.size());
  const int nr = static_cast<int>(ys.size());

  mesh.nodes.clear();
  mesh.triangles.clear();
  mesh.nodes.reserve(static_cast<std::size_t>(nc) * nr);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) mesh.nodes.emplace_back(xs[c], ys[r]);
  auto id = [nc](int r, int c) { return r * nc + c; };
  for (int r = 0; r + 1 < nr; ++r) {
    for (int c = 0; c + 1 < nc; ++c) {
      // Alternate the quad diagonal by parity; both splits give right
      // triangles on an axis-aligned grid.
      if ((r + c) % 2 == 0) {
        mesh.triangles.push_back({id(r, c), id(r + 1, c + 1), id(r + 1, c)});
        mesh.triangles.push_back({id(r, c), id(r, c + 1), id(r + 1, c + 1)});
      } else {
        mesh.triangles.push_back({id(r, c), id(r, c + 1), id(r + 1, c)});
        mesh.triangles.push_back({id(r, c + 1), id(r + 1, c + 1), id(r + 1, c)});
      }
    }
  }
  return true;
}

// Grid-node lookup used to tie structured meshes back to the edge meshes.
inline int locate_node(const SubdomainMesh& mesh, const Vec2& p, double tol) {
  int best = -1;
  double best_d = tol;
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const double d = (mesh.nodes[i] - p).norm();
    if (d <= best_d) {
      best = static_cast<int>(i);
      best_d = d;
    }
  }
  return best;
}

// --- delaunay generator --------------------------------------------------------

inline bool build_delaunay(const BoundaryWalk& walk, double h, double seed_spacing,
                           SubdomainMesh& mesh) {
  const std::vector<Vec2>& poly = walk.points;
  Vec2 lo = poly.front(), hi = poly.front();
  for (const Vec2& p : poly) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  // Hexagonal interior seeds, kept clear of the boundary, with a tiny
  // deterministic jitter to avoid cocircular lattice degeneracies.
  std::vector<Vec2> points = poly;
  const double a = seed_spacing;
  const double row_h = a * std::sqrt(3.0) / 2.0;
  const double clearance = 0.6 * h;
  std::uint64_t counter = 0;
  for (int r = 0;; ++r) {
    const double y = lo.y() + row_h * (r + 0.5);
    if (y > hi.y()) break;
    for (int c = 0;; ++c) {
      double x = lo.x() + a * (c + 0.25) + ((r % 2) ? 0.5 * a : 0.0);
      if (x > hi.x()) break;
      Vec2 p(x + 1e-4 * a * hash_unit(counter, 0), y + 1e-4 * a * hash_unit(counter, 1));
      ++counter;
      if (!point_in_polygon(poly, p)) continue;
      bool clear = true;
      for (std::size_t i = 0; i < poly.size() && clear; ++i)
        if (distance_to_segment(poly[i], poly[(i + 1) % poly.size()], p) < clearance)
          clear = false;
      if (clear) points.push_back(p);
    }
  }

  const BWTriangulation tri = bowyer_watson(points);
  const int np = static_cast<int>(points.size());

  // Keep triangles made of real points whose centroid lies inside.
  std::vector<std::array<int, 3>> kept;
  for (const auto& t : tri.triangles) {
    if (t[0] >= np || t[1] >= np || t[2] >= np) continue;
    const Vec2 centroid = (tri.points[t[0]] + tri.points[t[1]] + tri.points[t[2]]) / 3.0;
    if (!point_in_polygon(poly, centroid)) continue;
    std::array<int, 3> u = t;
    if (triangle_signed_area(tri.points[u[0]], tri.points[u[1]], tri.points[u[2]]) < 0.0)
      std::swap(u[1], u[2]);
    kept.push_back(u);
  }

  // Compact node numbering: boundary nodes keep their polyline order.
  std::vector<int> remap(points.size(), -1);
  mesh.nodes.clear();
  mesh.triangles.clear();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    remap[i] = static_cast<int>(i);
    mesh.nodes.push_back(points[i]);
  }
  for (const auto& t : kept)
    for (int k = 0; k < 3; ++k)
      if (remap[t[k]] < 0) {
        remap[t[k]] = static_cast<int>(mesh.nodes.size());
        mesh.nodes.push_back(points[t[k]]);
      }
  for (const auto& t : kept) mesh.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return !mesh.triangles.empty();
}

}  // namespace detail

// Mesh the whole domain with target size h.  Postconditions are verified for
// every subdomain; a violation raises std::runtime_error.
inline MeshSet mesh_domain(const PartitionedDomain& domain, double target_h,
                           MeshOptions options = {}) {
  if (!(target_h > 0.0)) throw std::invalid_argument("mesh size must be positive");
  if (domain.edges.empty()) throw std::invalid_argument("domain has no edges");

  MeshSet out;
  double l_min = domain.edges.front().length;
  for (const auto& e : domain.edges) l_min = std::min(l_min, e.length);
  double h = target_h;
  if (h > l_min) {
    h = 0.5 * l_min;
    std::ostringstream note;
    note << "target size " << target_h << " exceeds the shortest edge length " << l_min
         << "; clamped to " << h;
    out.notes.push_back(note.str());
  }
  out.h = h;

  std::map<int, int> edge_index;
  for (const auto& e : domain.edges) {
    edge_index[e.id] = static_cast<int>(out.edges.size());
    out.edges.push_back(mesh_edge(e, h));
  }
  for (const auto& e : domain.edges) {
    const EdgeMesh& em = out.edges[edge_index[e.id]];
    out.vertex_trace.endpoint[{e.id, e.source_vertex}] = 0;
    out.vertex_trace.endpoint[{e.id, e.terminal_vertex}] = em.cell_count();
  }

  for (const auto& sub : domain.subdomains) {
    const detail::BoundaryWalk walk = detail::walk_boundary(domain, sub, out.edges, edge_index);
    const double polygon_area = std::abs(detail::shoelace_area(walk.points));

    SubdomainMesh mesh;
    mesh.subdomain_id = sub.id;

    bool structured = false;
    if (options.generator != MeshOptions::Generator::delaunay) {
      structured = detail::build_structured(domain, sub, walk, mesh);
      if (!structured && options.generator == MeshOptions::Generator::structured)
        throw std::runtime_error("subdomain " + std::to_string(sub.id) +
                                 " is not an axis-aligned rectangle with matching side meshes");
    }

    std::vector<int> boundary_node;  // polyline index -> mesh node index
    if (structured) {
      const double scale = std::max(1.0, walk.points.front().norm());
      boundary_node.resize(walk.points.size());
      for (std::size_t i = 0; i < walk.points.size(); ++i) {
        const int idx = detail::locate_node(mesh, walk.points[i], 1e-9 * scale);
        if (idx < 0)
          throw std::runtime_error("structured mesh of subdomain " + std::to_string(sub.id) +
                                   " misses a boundary node");
        boundary_node[i] = idx;
      }
      // The grid numbering does not follow the 0..nb-1 boundary convention
      // of verify_subdomain_mesh; run the area and diameter checks directly
      // (the tensor construction is manifold by construction).
      double area_sum = 0.0;
      for (const auto& t : mesh.triangles) {
        area_sum += detail::triangle_signed_area(mesh.nodes[t[0]], mesh.nodes[t[1]],
                                                 mesh.nodes[t[2]]);
        mesh.max_diameter = std::max(
            mesh.max_diameter, detail::triangle_diameter(mesh.nodes[t[0]], mesh.nodes[t[1]],
                                                         mesh.nodes[t[2]]));
      }
      if (std::abs(area_sum - polygon_area) > 1e-10 * polygon_area)
        throw std::runtime_error("structured mesh of subdomain " + std::to_string(sub.id) +
                                 " does not tile its polygon");
    } else {
      // Delaunay path with retries on a denser interior set.
      double spacing = h;
      bool ok = false;
      std::vector<std::string> problems;
      for (int attempt = 0; attempt < 4 && !ok; ++attempt, spacing *= 0.85) {
        mesh.nodes.clear();
        mesh.triangles.clear();
        problems.clear();
        if (!detail::build_delaunay(walk, h, spacing, mesh)) continue;
        ok = detail::verify_subdomain_mesh(mesh, walk.points.size(), polygon_area, h, &problems);
      }
      if (!ok) {
        std::string msg = "triangulation of subdomain " + std::to_string(sub.id) + " failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
      }
      boundary_node.resize(walk.points.size());
      for (std::size_t i = 0; i < walk.points.size(); ++i)
        boundary_node[i] = static_cast<int>(i);
      for (const auto& t : mesh.triangles)
        mesh.max_diameter = std::max(
            mesh.max_diameter, detail::triangle_diameter(mesh.nodes[t[0]], mesh.nodes[t[1]],
                                                         mesh.nodes[t[2]]));
    }

    // Record traces and boundary facets per geometry edge.
    for (std::size_t li = 0; li < sub.boundary_loop.size(); ++li) {
      const auto& leg = sub.boundary_loop[li];
      const auto& leg_trace = walk.leg_trace[li];
      std::vector<int> trace(leg_trace.size());
      for (std::size_t m = 0; m < leg_trace.size(); ++m)
        trace[m] = boundary_node[leg_trace[m]];
      std::vector<BoundaryFacet> facets;
      for (std::size_t m = 0; m + 1 < trace.size(); ++m)
        facets.push_back({trace[m], trace[m + 1]});
      mesh.edge_facets[leg.edge_id] = std::move(facets);
      out.trace.nodes[{sub.id, leg.edge_id}] = std::move(trace);
    }

    out.subdomains.push_back(std::move(mesh));
  }

  // Conformity across the mesh set: subdomain boundary nodes must coincide
  // with the edge-mesh nodes they represent.
  for (const auto& [key, trace] : out.trace.nodes) {
    const auto& [sid, eid] = key;
    const Edge& e = domain.edge(eid);
    const SubdomainMesh& sm = out.subdomain_mesh(sid);
    const EdgeMesh& em = out.edge_mesh(eid);
    for (std::size_t m = 0; m < trace.size(); ++m) {
      const Vec2 expected = detail::edge_node_position(domain, e, em.nodes[m]);
      if ((sm.nodes[trace[m]] - expected).norm() > 1e-10 * e.length)
        throw std::runtime_error("non-conforming trace on subdomain " + std::to_string(sid) +
                                 ", edge " + std::to_string(eid));
    }
  }

  return out;
}

// Prolongation: place edge-nodal values at the matched subdomain nodes.  The
// result has one entry per subdomain node, zero away from the trace.
inline Eigen::VectorXd lift_edge_values(const MeshSet& meshes, int subdomain, int edge,
                                        const Eigen::VectorXd& edge_values) {
  const auto& trace = meshes.trace.at(subdomain, edge);
  if (edge_values.size() != static_cast<Eigen::Index>(trace.size()))
    throw std::invalid_argument("edge value vector does not match the edge mesh");
  Eigen::VectorXd out =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(meshes.subdomain_mesh(subdomain).nodes.size()));
  for (std::size_t m = 0; m < trace.size(); ++m) out[trace[m]] = edge_values[m];
  return out;
}

// Restriction (exact transpose of lift_edge_values): sample subdomain-nodal
// values at the trace nodes.
inline Eigen::VectorXd scatter_to_edge(const MeshSet& meshes, int subdomain, int edge,
                                       const Eigen::VectorXd& subdomain_values) {
  const auto& trace = meshes.trace.at(subdomain, edge);
  if (subdomain_values.size() !=
      static_cast<Eigen::Index>(meshes.subdomain_mesh(subdomain).nodes.size()))
    throw std::invalid_argument("subdomain value vector does not match the mesh");
  Eigen::VectorXd out(static_cast<Eigen::Index>(trace.size()));
  for (std::size_t m = 0; m < trace.size(); ++m) out[m] = subdomain_values[trace[m]];
  return out;
}

}  // namespace netdiff
