#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <netdiff/analysis.hpp>
#include <netdiff/assembly.hpp>
#include <netdiff/mesh.hpp>

#include "support.hpp"

using namespace netdiff;

namespace {

// Hand-built mesh of the reference triangle (0,0), (1,0), (0,1): one element,
// one facet per geometry edge.
PartitionedDomain reference_triangle_domain() {
  PartitionedDomain d;
  d.vertices = {{1, Vec2(0, 0)}, {2, Vec2(1, 0)}, {3, Vec2(0, 1)}};
  d.edges = {{1, 1, 2, 0.0, {1}}, {2, 2, 3, 0.0, {1}}, {3, 3, 1, 0.0, {1}}};
  d.subdomains = {{1, {{1, false}, {2, false}, {3, false}}}};
  support::fill_lengths(d);
  return d;
}

MeshSet reference_triangle_mesh(const PartitionedDomain& d) {
  MeshSet meshes;
  SubdomainMesh sm;
  sm.subdomain_id = 1;
  sm.nodes = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  sm.triangles = {{0, 1, 2}};
  sm.edge_facets[1] = {{0, 1}};
  sm.edge_facets[2] = {{1, 2}};
  sm.edge_facets[3] = {{2, 0}};
  sm.max_diameter = std::sqrt(2.0);
  meshes.subdomains.push_back(sm);
  for (const auto& e : d.edges) {
    EdgeMesh em;
    em.edge_id = e.id;
    em.nodes = {0.0, e.length};
    meshes.edges.push_back(em);
    meshes.vertex_trace.endpoint[{e.id, e.source_vertex}] = 0;
    meshes.vertex_trace.endpoint[{e.id, e.terminal_vertex}] = 1;
  }
  meshes.trace.nodes[{1, 1}] = {0, 1};
  meshes.trace.nodes[{1, 2}] = {1, 2};
  meshes.trace.nodes[{1, 3}] = {2, 0};
  meshes.h = 1.0;
  return meshes;
}

DiscreteState random_state(const BlockLayout& layout, const MeshSet& meshes, unsigned seed,
                           double lo = 0.5, double hi = 1.5) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> value(lo, hi);
  DiscreteState x = make_zero_state(layout, meshes);
  for (auto& u : x.u)
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = value(rng);
  for (auto& w : x.w)
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = value(rng);
  for (Eigen::Index i = 0; i < x.z.size(); ++i) x.z[i] = value(rng);
  return x;
}

}  // namespace

TEST_CASE("junction matrix frozen examples") {
  const auto figure = support::figure_network();

  // Single rate gamma(7 -> 6) = 2 at the interior junction (edges 6, 7, 9).
  ModelSpec one_rate;
  one_rate.coupling.gamma[{1, 7, 6}] = 2.0;
  const JunctionSystem js = build_junction_system(figure, one_rate, 1);
  REQUIRE(js.edge_order == std::vector<int>{6, 7, 9});
  Eigen::Matrix3d expected;
  expected << 0, -2, 0,
              0,  2, 0,
              0,  0, 0;
  CHECK((js.N - expected).norm() == 0.0);
  CHECK(js.E.norm() == 0.0);
  CHECK_FALSE(js.populated);
  // Column sums vanish identically; row sums only for symmetric rates.
  const Eigen::VectorXd colsum = js.N.colwise().sum();
  CHECK(colsum.lpNorm<Eigen::Infinity>() == 0.0);
  const Eigen::VectorXd rowsum = js.N.rowwise().sum();
  CHECK(rowsum[0] == -2.0);
  CHECK(rowsum[1] == 2.0);
  CHECK(rowsum[2] == 0.0);
}

TEST_CASE("junction matrix with uniform symmetric rates") {
  const auto two = support::two_squares();
  ModelSpec model;
  support::set_symmetric_gamma(model, two, 1.0);
  support::set_all_vertex_exchange(model, two, 1.0, 1.0);
  // Vertex 2 joins edges 1, 2, 7.
  const JunctionSystem js = build_junction_system(two, model, 2);
  REQUIRE(js.edge_order == std::vector<int>{1, 2, 7});
  Eigen::Matrix3d expected;
  expected <<  2, -1, -1,
              -1,  2, -1,
              -1, -1,  2;
  CHECK((js.N - expected).norm() == 0.0);
  CHECK((js.E - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK((js.lambda - Eigen::Vector3d::Ones()).norm() == 0.0);
  CHECK(js.populated);
}

TEST_CASE("junction column sums vanish for random rates") {
  const auto figure = support::figure_network();
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> rate(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    ModelSpec model;
    for (const auto& v : figure.vertices) {
      const auto incident = edges_at_vertex(figure, v.id);
      for (const auto& a : incident)
        for (const auto& b : incident)
          if (a.edge_id != b.edge_id)
            model.coupling.gamma[{v.id, a.edge_id, b.edge_id}] = rate(rng);
    }
    for (const auto& v : figure.vertices) {
      const JunctionSystem js = build_junction_system(figure, model, v.id);
      CHECK(js.N.colwise().sum().lpNorm<Eigen::Infinity>() <= 1e-14 * js.N.norm());
    }
  }
}

TEST_CASE("layout is contiguous") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  const BlockLayout layout = make_layout(domain, meshes);

  Eigen::Index expected = 0;
  for (std::size_t i = 0; i < layout.subdomain_ids.size(); ++i) {
    CHECK(layout.u_offset[i] == expected);
    expected += static_cast<Eigen::Index>(
        meshes.subdomain_mesh(layout.subdomain_ids[i]).nodes.size());
  }
  for (std::size_t j = 0; j < layout.edge_ids.size(); ++j) {
    CHECK(layout.w_offset[j] == expected);
    expected += static_cast<Eigen::Index>(meshes.edge_mesh(layout.edge_ids[j]).nodes.size());
  }
  CHECK(layout.z_offset == expected);
  CHECK(layout.size == expected + static_cast<Eigen::Index>(layout.vertex_ids.size()));

  // flatten / unflatten are inverse bijections.
  const DiscreteState x = random_state(layout, meshes, 11);
  const Eigen::VectorXd v = flatten(layout, x);
  const DiscreteState back = unflatten(layout, meshes, v);
  CHECK((flatten(layout, back) - v).norm() == 0.0);
}

TEST_CASE("zero state has zero residual") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  ModelSpec model;
  support::set_all_robin(model, domain, 1.0, 1.0);
  support::set_symmetric_gamma(model, domain, 1.0);
  support::set_all_vertex_exchange(model, domain, 1.0, 1.0);
  const AssemblyContext ctx = make_context(domain, meshes, model);
  const DiscreteState zero = make_zero_state(ctx.layout, meshes);
  const Eigen::VectorXd R = assemble_residual(ctx, zero, zero, 0.01, 0.01);
  CHECK(R.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("constant state with matched rates is steady") {
  // alpha = beta kills the Robin exchange at equal values, symmetric gamma
  // kills the junction rows on constants, delta = lambda kills the vertex
  // terms: a flat state is an exact steady state of the scheme.
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  ModelSpec model;
  support::set_all_robin(model, domain, 1.3, 1.3);
  support::set_symmetric_gamma(model, domain, 0.7);
  support::set_all_vertex_exchange(model, domain, 0.4, 0.4);
  const AssemblyContext ctx = make_context(domain, meshes, model);

  DiscreteState flat = make_zero_state(ctx.layout, meshes);
  for (auto& u : flat.u) u.setConstant(2.5);
  for (auto& w : flat.w) w.setConstant(2.5);
  flat.z.setConstant(2.5);
  const Eigen::VectorXd R = assemble_residual(ctx, flat, flat, 0.01, 0.01);
  CHECK(R.lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("single element stiffness matrix") {
  const auto domain = reference_triangle_domain();
  const MeshSet meshes = reference_triangle_mesh(domain);
  ModelSpec model;  // p = 2, zero reactions
  support::set_all_robin(model, domain, 0.0, 0.0);
  const AssemblyContext ctx = make_context(domain, meshes, model);

  // With a huge dt the mass part is negligible and the u block is the pure
  // stiffness matrix of the reference triangle.
  const DiscreteState zero = make_zero_state(ctx.layout, meshes);
  const Eigen::SparseMatrix<double> J = assemble_tangent(ctx, zero, 1e30);
  Eigen::Matrix3d K;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) K(i, j) = J.coeff(i, j);
  Eigen::Matrix3d expected;
  expected <<  1.0, -0.5, -0.5,
              -0.5,  0.5,  0.0,
              -0.5,  0.0,  0.5;
  CHECK((K - expected).norm() <= 1e-12);
}

TEST_CASE("tangent matches finite differences of the residual") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  ModelSpec model;
  model.subdomain_reaction = {ReactionKind::linear, 0.7, 2.0};
  model.edge_reaction = {ReactionKind::power, 0.5, 3.0};
  support::set_all_robin(model, domain, 1.0, 2.0);
  support::set_symmetric_gamma(model, domain, 0.5);
  support::set_all_vertex_exchange(model, domain, 1.0, 0.5);

  for (double p : {2.0, 3.0, 4.0}) {
    model.subdomain_flux = {p, FluxVariant::pure_power, 1e-2};
    model.edge_flux = {p, FluxVariant::linear_plus_power, 1e-2};
    const AssemblyContext ctx = make_context(domain, meshes, model);
    const DiscreteState x = random_state(ctx.layout, meshes, 42 + static_cast<unsigned>(p));
    const DiscreteState x_prev = random_state(ctx.layout, meshes, 7);
    const double dt = 0.1;

    const Eigen::MatrixXd J = Eigen::MatrixXd(assemble_tangent(ctx, x, dt));
    const Eigen::VectorXd base = flatten(ctx.layout, x);
    Eigen::MatrixXd J_fd(J.rows(), J.cols());
    const double step = 1e-7;
    for (Eigen::Index col = 0; col < base.size(); ++col) {
      Eigen::VectorXd plus = base, minus = base;
      plus[col] += step;
      minus[col] -= step;
      const Eigen::VectorXd r_plus = assemble_residual(
          ctx, unflatten(ctx.layout, meshes, plus), x_prev, dt, dt);
      const Eigen::VectorXd r_minus = assemble_residual(
          ctx, unflatten(ctx.layout, meshes, minus), x_prev, dt, dt);
      J_fd.col(col) = (r_plus - r_minus) / (2.0 * step);
    }
    CAPTURE(p);
    const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
    CHECK((J - J_fd).cwiseAbs().maxCoeff() <= 1e-5 * scale);
  }
}

TEST_CASE("robin coupling blocks carry the facet mass matrix") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  ModelSpec model;
  support::set_all_robin(model, domain, 0.0, 0.0);
  model.coupling.alpha[{1, 7}] = 2.0;
  model.coupling.beta[{1, 7}] = 3.0;
  const AssemblyContext ctx = make_context(domain, meshes, model);

  const DiscreteState zero = make_zero_state(ctx.layout, meshes);
  const Eigen::SparseMatrix<double> J = assemble_tangent(ctx, zero, 1.0);

  const int sub_pos = ctx.layout.subdomain_pos.at(1);
  const int edge_pos = ctx.layout.edge_pos.at(7);
  const auto& trace = meshes.trace.at(1, 7);
  const Eigen::Index u0 = ctx.layout.u_offset[sub_pos];
  const Eigen::Index w0 = ctx.layout.w_offset[edge_pos];
  const double L = 0.5;  // facet length: edge 7 has two cells of length 1/2

  // First facet couples edge nodes (0, 1) with subdomain nodes trace[0..1].
  // u rows see -alpha * mass, w rows see -beta * mass.  The midpoint node
  // (index 1) sits on both facets, so its diagonal accumulates L/3 twice.
  CHECK(J.coeff(u0 + trace[0], w0 + 0) == Catch::Approx(-2.0 * L / 3.0).epsilon(1e-13));
  CHECK(J.coeff(u0 + trace[0], w0 + 1) == Catch::Approx(-2.0 * L / 6.0).epsilon(1e-13));
  CHECK(J.coeff(u0 + trace[1], w0 + 0) == Catch::Approx(-2.0 * L / 6.0).epsilon(1e-13));
  CHECK(J.coeff(u0 + trace[1], w0 + 1) == Catch::Approx(-2.0 * 2.0 * L / 3.0).epsilon(1e-13));

  CHECK(J.coeff(w0 + 0, u0 + trace[0]) == Catch::Approx(-3.0 * L / 3.0).epsilon(1e-13));
  CHECK(J.coeff(w0 + 0, u0 + trace[1]) == Catch::Approx(-3.0 * L / 6.0).epsilon(1e-13));
  CHECK(J.coeff(w0 + 1, u0 + trace[0]) == Catch::Approx(-3.0 * L / 6.0).epsilon(1e-13));

  // Unrelated cross blocks stay empty (alpha = beta = 0 there).
  const int edge1_pos = ctx.layout.edge_pos.at(1);
  const Eigen::Index w1 = ctx.layout.w_offset[edge1_pos];
  const auto& trace1 = meshes.trace.at(1, 1);
  CHECK(J.coeff(u0 + trace1[0], w1 + 0) == 0.0);
}

TEST_CASE("residual sums to the discrete mass rate") {
  // Test functions equal to one everywhere turn the weak form into the mass
  // balance: all exchange terms cancel in exact arithmetic, for arbitrary
  // coefficient draws, leaving sum(R) = (mass(x) - mass(x_prev)) / dt.
  const auto domain = support::figure_network();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> coef(0.1, 2.0);

  for (int trial = 0; trial < 5; ++trial) {
    ModelSpec model;  // f = g = 0; mass exchange only
    for (const auto& e : domain.edges)
      for (int sid : e.adjacent_subdomains) {
        model.coupling.alpha[{sid, e.id}] = coef(rng);
        model.coupling.beta[{sid, e.id}] = coef(rng);
      }
    for (const auto& v : domain.vertices) {
      const auto incident = edges_at_vertex(domain, v.id);
      for (const auto& a : incident) {
        model.coupling.delta[{v.id, a.edge_id}] = coef(rng);
        model.coupling.lambda[{v.id, a.edge_id}] = coef(rng);
        for (const auto& b : incident)
          if (a.edge_id != b.edge_id)
            model.coupling.gamma[{v.id, a.edge_id, b.edge_id}] = coef(rng);  // asymmetric
      }
    }
    const AssemblyContext ctx = make_context(domain, meshes, model);
    const DiscreteState x = random_state(ctx.layout, meshes, 1000 + trial);
    const DiscreteState x_prev = random_state(ctx.layout, meshes, 2000 + trial);
    const double dt = 0.05;
    const Eigen::VectorXd R = assemble_residual(ctx, x, x_prev, dt, dt);
    const double mass_rate = (total_mass(ctx, x) - total_mass(ctx, x_prev)) / dt;
    CAPTURE(trial);
    CHECK(R.sum() == Catch::Approx(mass_rate).margin(1e-10 * std::max(1.0, std::abs(mass_rate))));
  }
}

TEST_CASE("assembly is independent of the thread count") {
  const auto domain = support::figure_network();
  const MeshSet meshes = mesh_domain(domain, 0.4);
  ModelSpec model;
  model.subdomain_flux = {3.0, FluxVariant::pure_power, 1e-2};
  model.edge_flux = {3.0, FluxVariant::pure_power, 1e-2};
  support::set_all_robin(model, domain, 1.0, 1.0);
  support::set_symmetric_gamma(model, domain, 1.0);

  AssemblyContext ctx = make_context(domain, meshes, model);
  const DiscreteState x = random_state(ctx.layout, meshes, 3);
  const DiscreteState x_prev = random_state(ctx.layout, meshes, 4);

  ctx.threads = 1;
  const Eigen::VectorXd R1 = assemble_residual(ctx, x, x_prev, 0.01, 0.01);
  const Eigen::SparseMatrix<double> J1 = assemble_tangent(ctx, x, 0.01);
  ctx.threads = 4;
  const Eigen::VectorXd R4 = assemble_residual(ctx, x, x_prev, 0.01, 0.01);
  const Eigen::SparseMatrix<double> J4 = assemble_tangent(ctx, x, 0.01);

  CHECK((R1 - R4).lpNorm<Eigen::Infinity>() == 0.0);  // bitwise equal
  CHECK(Eigen::MatrixXd(J1 - J4).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("junction flux balance on linear edge profiles") {
  // At vertex 2 (edges 1, 2, 7) impose linear profiles with known endpoint
  // values c_j and outward slopes s_j.  With p = 2 the balance component for
  // edge j is s_j + delta c_j + 0.3 (2 c_j - sum of the other values)
  // - lambda z.
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  ModelSpec model;
  support::set_all_robin(model, domain, 0.0, 0.0);
  const double d = 0.8, l = 0.6, g = 0.3;
  for (int eid : {1, 2, 7}) {
    model.coupling.delta[{2, eid}] = d;
    model.coupling.lambda[{2, eid}] = l;
  }
  for (int a : {1, 2, 7})
    for (int b : {1, 2, 7})
      if (a != b) model.coupling.gamma[{2, a, b}] = g;
  const AssemblyContext ctx = make_context(domain, meshes, model);

  DiscreteState x = make_zero_state(ctx.layout, meshes);
  const double c1 = 1.2, c2 = -0.4, c7 = 0.9;
  const double s1 = 0.5, s2 = -1.1, s7 = 2.0;
  // Edge 1 runs vertex 1 -> 2 (arclength 1 at the vertex); nodes at 0, .5, 1.
  auto set_profile = [&](int eid, double value_at_vertex, double outward_slope,
                         bool vertex_at_start) {
    const int pos = ctx.layout.edge_pos.at(eid);
    const EdgeMesh& em = meshes.edge_mesh(eid);
    for (std::size_t m = 0; m < em.nodes.size(); ++m) {
      const double dist = vertex_at_start ? em.nodes[m] : (em.nodes.back() - em.nodes[m]);
      x.w[pos][static_cast<Eigen::Index>(m)] = value_at_vertex - outward_slope * dist;
    }
  };
  set_profile(1, c1, s1, false);
  set_profile(2, c2, s2, true);
  set_profile(7, c7, s7, true);
  const double z = 0.7;
  x.z[ctx.layout.vertex_pos.at(2)] = z;

  const Eigen::VectorXd balance = junction_flux_balance(ctx, x, 2);
  REQUIRE(balance.size() == 3);
  const double exp1 = s1 + d * c1 + g * (2 * c1 - c2 - c7) - l * z;
  const double exp2 = s2 + d * c2 + g * (2 * c2 - c1 - c7) - l * z;
  const double exp7 = s7 + d * c7 + g * (2 * c7 - c1 - c2) - l * z;
  CHECK(balance[0] == Catch::Approx(exp1).margin(1e-12));
  CHECK(balance[1] == Catch::Approx(exp2).margin(1e-12));
  CHECK(balance[2] == Catch::Approx(exp7).margin(1e-12));

  // Symmetric rates, unpopulated, flat profiles: exact Kirchhoff balance.
  ModelSpec kirchhoff;
  support::set_all_robin(kirchhoff, domain, 0.0, 0.0);
  for (int a : {1, 2, 7})
    for (int b : {1, 2, 7})
      if (a != b) kirchhoff.coupling.gamma[{2, a, b}] = g;
  const AssemblyContext ctx2 = make_context(domain, meshes, kirchhoff);
  DiscreteState flat = make_zero_state(ctx2.layout, meshes);
  for (auto& w : flat.w) w.setConstant(1.0);
  const Eigen::VectorXd flat_balance = junction_flux_balance(ctx2, flat, 2);
  CHECK(flat_balance.lpNorm<Eigen::Infinity>() <= 1e-14);
}
