#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include <netdiff/mesh.hpp>

#include "support.hpp"

using namespace netdiff;

namespace {

double triangle_area(const SubdomainMesh& m, const std::array<int, 3>& t) {
  const Vec2 a = m.nodes[t[0]], b = m.nodes[t[1]], c = m.nodes[t[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

double mesh_area(const SubdomainMesh& m) {
  double area = 0.0;
  for (const auto& t : m.triangles) area += triangle_area(m, t);
  return area;
}

// Every trace node of (subdomain, edge) must coincide with the arclength
// position of the matching edge-mesh node.
void check_conformity(const PartitionedDomain& domain, const MeshSet& meshes) {
  for (const auto& [key, node_ids] : meshes.trace.nodes) {
    const auto& [sid, eid] = key;
    const Edge& e = domain.edge(eid);
    const SubdomainMesh& sub = meshes.subdomain_mesh(sid);
    const EdgeMesh& em = meshes.edge_mesh(eid);
    REQUIRE(node_ids.size() == em.nodes.size());
    for (std::size_t m = 0; m < node_ids.size(); ++m) {
      const Vec2 expected = detail::edge_node_position(domain, e, em.nodes[m]);
      const Vec2 actual = sub.nodes[node_ids[m]];
      REQUIRE((actual - expected).norm() <= 1e-10 * std::max(1.0, e.length));
    }
  }
}

}  // namespace

TEST_CASE("edge meshes split by arclength") {
  Edge e{1, 1, 2, 1.0, {1}};
  const EdgeMesh m = mesh_edge(e, 0.3);
  REQUIRE(m.nodes.size() == 5);  // ceil(1/0.3) = 4 cells
  CHECK(m.nodes.front() == 0.0);
  CHECK(m.nodes.back() == 1.0);
  CHECK(m.nodes[2] == Catch::Approx(0.5).margin(1e-15));
  CHECK(m.cell_count() == 4);

  // h larger than the edge still yields one cell.
  CHECK(mesh_edge(e, 5.0).cell_count() == 1);
}

TEST_CASE("structured mesh of the unit square") {
  const auto domain = support::unit_square();
  const MeshSet meshes = mesh_domain(domain, 0.25);
  const SubdomainMesh& m = meshes.subdomain_mesh(1);

  CHECK(m.nodes.size() == 25);      // 5 x 5 grid
  CHECK(m.triangles.size() == 32);  // 16 quads split in two
  CHECK(mesh_area(m) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(m.max_diameter <= 2.0 * 0.25 + 1e-12);
  for (const auto& t : m.triangles) CHECK(triangle_area(m, t) > 0.0);  // CCW

  // Each side of the square carries 4 boundary facets.
  for (int eid : {1, 2, 3, 4}) {
    REQUIRE(m.edge_facets.count(eid) == 1);
    CHECK(m.edge_facets.at(eid).size() == 4);
  }
  check_conformity(domain, meshes);
}

TEST_CASE("two squares share the interior edge discretization") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.25);
  check_conformity(domain, meshes);

  // Both squares see the same number of facets on the shared edge 7 and the
  // edge mesh has matching cells.
  const auto& left = meshes.subdomain_mesh(1);
  const auto& right = meshes.subdomain_mesh(2);
  const auto& em = meshes.edge_mesh(7);
  REQUIRE(left.edge_facets.count(7) == 1);
  REQUIRE(right.edge_facets.count(7) == 1);
  CHECK(static_cast<int>(left.edge_facets.at(7).size()) == em.cell_count());
  CHECK(static_cast<int>(right.edge_facets.at(7).size()) == em.cell_count());

  // Trace endpoints agree with the vertex trace.
  CHECK(meshes.vertex_trace.at(7, 2) == 0);               // edge 7 runs vertex 2 -> 5
  CHECK(meshes.vertex_trace.at(7, 5) == em.cell_count());
  CHECK_THROWS_AS(meshes.vertex_trace.at(7, 1), std::out_of_range);
}

TEST_CASE("unstructured mesh of the network domain") {
  const auto domain = support::figure_network();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  check_conformity(domain, meshes);

  double total = 0.0;
  for (const auto& m : meshes.subdomains) {
    for (const auto& t : m.triangles) CHECK(triangle_area(m, t) > 0.0);
    CHECK(m.max_diameter <= 2.0 * 0.5 + 1e-12);
    total += mesh_area(m);
  }
  CHECK(total == Catch::Approx(21.0).epsilon(1e-10));

  // Subdomain 1 is the triangle with area 4.
  CHECK(mesh_area(meshes.subdomain_mesh(1)) == Catch::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("meshing is deterministic") {
  const auto domain = support::figure_network();
  const MeshSet a = mesh_domain(domain, 0.4);
  const MeshSet b = mesh_domain(domain, 0.4);
  REQUIRE(a.subdomains.size() == b.subdomains.size());
  for (std::size_t i = 0; i < a.subdomains.size(); ++i) {
    REQUIRE(a.subdomains[i].nodes.size() == b.subdomains[i].nodes.size());
    for (std::size_t n = 0; n < a.subdomains[i].nodes.size(); ++n) {
      CHECK(a.subdomains[i].nodes[n].x() == b.subdomains[i].nodes[n].x());  // bitwise
      CHECK(a.subdomains[i].nodes[n].y() == b.subdomains[i].nodes[n].y());
    }
    REQUIRE(a.subdomains[i].triangles == b.subdomains[i].triangles);
  }
}

TEST_CASE("oversized h is clamped to half the shortest edge") {
  const auto domain = support::two_squares();  // shortest edge length 1
  const MeshSet meshes = mesh_domain(domain, 3.0);
  CHECK(meshes.h == Catch::Approx(0.5));
  REQUIRE_FALSE(meshes.notes.empty());
  CHECK(meshes.notes.front().find("clamp") != std::string::npos);
}

TEST_CASE("structured generator rejects non-rectangular subdomains") {
  const auto domain = support::figure_network();
  MeshOptions options;
  options.generator = MeshOptions::Generator::structured;
  CHECK_THROWS(mesh_domain(domain, 0.5, options));
}

TEST_CASE("delaunay generator also handles rectangles") {
  const auto domain = support::unit_square();
  MeshOptions options;
  options.generator = MeshOptions::Generator::delaunay;
  const MeshSet meshes = mesh_domain(domain, 0.3, options);
  check_conformity(domain, meshes);
  CHECK(mesh_area(meshes.subdomain_mesh(1)) == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("refinement shrinks the largest triangle") {
  const auto domain = support::figure_network();
  const double d1 = mesh_domain(domain, 0.8).subdomain_mesh(2).max_diameter;
  const double d2 = mesh_domain(domain, 0.4).subdomain_mesh(2).max_diameter;
  CHECK(d2 < d1);
  CHECK(d2 <= 0.8 + 1e-12);
}

TEST_CASE("lift and scatter are adjoint") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.2);
  std::mt19937 rng(777);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (const auto& [key, trace] : meshes.trace.nodes) {
    const auto& [sid, eid] = key;
    const Eigen::Index n_sub = static_cast<Eigen::Index>(meshes.subdomain_mesh(sid).nodes.size());
    const Eigen::Index n_edge = static_cast<Eigen::Index>(meshes.edge_mesh(eid).nodes.size());
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd w(n_edge), r(n_sub);
      for (Eigen::Index i = 0; i < n_edge; ++i) w[i] = gauss(rng);
      for (Eigen::Index i = 0; i < n_sub; ++i) r[i] = gauss(rng);
      const double lhs = lift_edge_values(meshes, sid, eid, w).dot(r);
      const double rhs = w.dot(scatter_to_edge(meshes, sid, eid, r));
      REQUIRE(lhs == Catch::Approx(rhs).margin(1e-13 * std::max(1.0, std::abs(lhs))));
    }
  }
}
