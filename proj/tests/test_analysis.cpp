#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <netdiff/analysis.hpp>
#include <netdiff/assembly.hpp>
#include <netdiff/mesh.hpp>

#include "support.hpp"

using namespace netdiff;

namespace {

struct SquareProblem {
  PartitionedDomain domain;
  MeshSet meshes;
  ModelSpec model;
  AssemblyContext ctx;

  explicit SquareProblem(double h = 0.25) {
    domain = support::unit_square();
    meshes = mesh_domain(domain, h);
    support::set_all_robin(model, domain, 1.0, 1.0);
    ctx = make_context(domain, meshes, model);
  }
};

}  // namespace

TEST_CASE("total mass of flat fields") {
  // u = 2 on area 1, w = 1 on total edge length 4, z = 0.75 at 4 vertices:
  // mass = 2 + 4 + 3 = 9.
  SquareProblem prob;
  DiscreteState x = make_zero_state(prob.ctx.layout, prob.meshes);
  for (auto& u : x.u) u.setConstant(2.0);
  for (auto& w : x.w) w.setConstant(1.0);
  x.z.setConstant(0.75);
  CHECK(total_mass(prob.ctx, x) == Catch::Approx(9.0).epsilon(1e-13));
}

TEST_CASE("squared norm is exact on piecewise linear fields") {
  // u = x: integral of x^2 over the unit square = 1/3 (the P1 interpolant of
  // x is x itself, and the formula integrates P1 squares exactly).
  // w = arclength on each unit edge: 4 * 1/3.  z = 1 at four vertices: + 4.
  SquareProblem prob;
  DiscreteState x = make_zero_state(prob.ctx.layout, prob.meshes);
  const auto& mesh = prob.meshes.subdomain_mesh(1);
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
    x.u[0][static_cast<Eigen::Index>(n)] = mesh.nodes[n].x();
  for (std::size_t j = 0; j < prob.ctx.layout.edge_ids.size(); ++j) {
    const auto& em = prob.meshes.edge_mesh(prob.ctx.layout.edge_ids[j]);
    for (std::size_t m = 0; m < em.nodes.size(); ++m)
      x.w[j][static_cast<Eigen::Index>(m)] = em.nodes[m];
  }
  x.z.setOnes();
  CHECK(squared_norm_X(prob.ctx, x) ==
        Catch::Approx(1.0 / 3.0 + 4.0 / 3.0 + 4.0).epsilon(1e-13));
}

TEST_CASE("dissipative energy of linear profiles") {
  // p = 2, epsilon = 0: energy = 1/2 |grad u|^2 integrated.  u = x gives 1/2
  // on the square; each edge with slope 1 gives 1/2 per unit length.
  SquareProblem prob;
  prob.model.subdomain_flux = {2.0, FluxVariant::pure_power, 0.0};
  prob.model.edge_flux = {2.0, FluxVariant::pure_power, 0.0};
  DiscreteState x = make_zero_state(prob.ctx.layout, prob.meshes);
  const auto& mesh = prob.meshes.subdomain_mesh(1);
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
    x.u[0][static_cast<Eigen::Index>(n)] = mesh.nodes[n].x();
  for (std::size_t j = 0; j < prob.ctx.layout.edge_ids.size(); ++j) {
    const auto& em = prob.meshes.edge_mesh(prob.ctx.layout.edge_ids[j]);
    for (std::size_t m = 0; m < em.nodes.size(); ++m)
      x.w[j][static_cast<Eigen::Index>(m)] = em.nodes[m];
  }
  CHECK(dissipative_energy(prob.ctx, x) == Catch::Approx(0.5 + 4 * 0.5).epsilon(1e-13));
}

TEST_CASE("report rows flag extinction against the initial size") {
  SquareProblem prob;
  DiscreteState x = make_zero_state(prob.ctx.layout, prob.meshes);
  for (auto& u : x.u) u.setConstant(1.0);
  const ReportRow row0 = compute_row(prob.ctx, x, 0.0);
  CHECK_FALSE(row0.extinct);
  CHECK(row0.sup_u == 1.0);
  for (auto& u : x.u) u.setConstant(1e-9);
  const ReportRow row1 = compute_row(prob.ctx, x, 1.0, row0.X);
  CHECK(row1.extinct);  // X ~ 1e-18 <= 1e-12 * X(0)
}

TEST_CASE("comparison bound picks the larger of the two suprema") {
  const auto domain = support::two_squares();
  ModelSpec model;
  support::set_all_robin(model, domain, 1.5, 1.0);  // alpha / beta = 1.5

  std::map<int, double> sup_w, sup_u0;
  for (const auto& e : domain.edges) sup_w[e.id] = 2.0;
  for (const auto& s : domain.subdomains) sup_u0[s.id] = 5.0;
  // max((alpha/beta) sup w, sup u0) = max(3, 5) = 5.
  CHECK(comparison_bound(model, domain, sup_w, sup_u0) == Catch::Approx(5.0));

  for (auto& [id, v] : sup_u0) v = 2.0;
  // now the edge side dominates: 1.5 * 2 = 3.
  CHECK(comparison_bound(model, domain, sup_w, sup_u0) == Catch::Approx(3.0));

  sup_w.erase(7);
  CHECK_THROWS_AS(comparison_bound(model, domain, sup_w, sup_u0), std::invalid_argument);
}

TEST_CASE("extinction exponents at the reference parameters") {
  // p = 2, sigma = 3/2: s_2 = 4/5 and s_1 = 7/9 exactly.
  const ExtinctionExponents e = extinction_exponents(2.0, 1.5);
  CHECK(e.s2 == Catch::Approx(0.8).margin(1e-12));
  CHECK(e.s1 == Catch::Approx(7.0 / 9.0).margin(1e-12));
  CHECK(e.theta2 == Catch::Approx(0.25).margin(1e-12));
  CHECK(e.theta1 == Catch::Approx(1.0 / 7.0).margin(1e-12));

  // sigma -> 2^-: the exponents collapse (s_d -> 1, theta_d -> 0) and the
  // self-similar window disappears.
  const ExtinctionExponents edge_case = extinction_exponents(2.0, 1.999999);
  CHECK(edge_case.s2 == Catch::Approx(1.0).margin(1e-5));
  CHECK(edge_case.theta2 == Catch::Approx(0.0).margin(1e-5));

  CHECK_THROWS_AS(extinction_exponents(1.5, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(extinction_exponents(2.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(extinction_exponents(2.0, 1.0), std::invalid_argument);
}

TEST_CASE("extinction fit on exact self-similar decay") {
  // X(t) = (1 - t/2)_+^(1/(1-s)) with s = 0.8 makes Y = X^(1-s) = 1 - t/2
  // exactly linear with extinction at t = 2.
  const double s = 0.8;
  std::vector<double> t, X;
  for (int k = 0; k <= 60; ++k) {
    const double tk = 0.05 * k;
    t.push_back(tk);
    const double y = std::max(0.0, 1.0 - tk / 2.0);
    X.push_back(std::pow(y, 1.0 / (1.0 - s)));
  }
  const ExtinctionFit fit = extinction_fit(t, X, s);
  CHECK(fit.extinct);
  CHECK(fit.t_extinct == Catch::Approx(2.0).margin(0.051));
  CHECK(fit.slope == Catch::Approx(-0.5).margin(1e-10));
  CHECK(fit.intercept == Catch::Approx(1.0).margin(1e-10));
  CHECK(fit.r_squared == Catch::Approx(1.0).margin(1e-12));
  CHECK(fit.max_second_difference <= 1e-12);
  CHECK(fit.window_count >= 30);
}

TEST_CASE("extinction fit flags convex decay") {
  // Exponential decay never goes extinct and X^(1-s) is strictly convex.
  const double s = 0.8;
  std::vector<double> t, X;
  for (int k = 0; k <= 60; ++k) {
    t.push_back(0.05 * k);
    X.push_back(std::exp(-2.0 * t.back()));
  }
  const ExtinctionFit fit = extinction_fit(t, X, s);
  CHECK_FALSE(fit.extinct);
  CHECK(fit.max_second_difference > 0.0);
  CHECK(fit.r_squared < 1.0);
}

TEST_CASE("kirchhoff residual sums the outward fluxes") {
  const auto domain = support::two_squares();
  const MeshSet meshes = mesh_domain(domain, 0.5);
  ModelSpec model;
  support::set_all_robin(model, domain, 0.0, 0.0);
  const AssemblyContext ctx = make_context(domain, meshes, model);

  DiscreteState x = make_zero_state(ctx.layout, meshes);
  // Linear profiles on the three edges at vertex 2 with outward slopes
  // 0.5, -1.1, 2.0 (see the assembly test for the construction).
  auto set_profile = [&](int eid, double value_at_vertex, double outward_slope,
                         bool vertex_at_start) {
    const int pos = ctx.layout.edge_pos.at(eid);
    const EdgeMesh& em = meshes.edge_mesh(eid);
    for (std::size_t m = 0; m < em.nodes.size(); ++m) {
      const double dist = vertex_at_start ? em.nodes[m] : (em.nodes.back() - em.nodes[m]);
      x.w[pos][static_cast<Eigen::Index>(m)] = value_at_vertex - outward_slope * dist;
    }
  };
  set_profile(1, 1.0, 0.5, false);
  set_profile(2, 1.0, -1.1, true);
  set_profile(7, 1.0, 2.0, true);

  // p = 2: the defect is the plain slope sum.
  CHECK(kirchhoff_residual(ctx, x, 2) == Catch::Approx(0.5 - 1.1 + 2.0).margin(1e-14));

  // It also equals the component sum of junction_flux_balance when the
  // junction matrices vanish (unpopulated, gamma = 0).
  const Eigen::VectorXd balance = junction_flux_balance(ctx, x, 2);
  CHECK(kirchhoff_residual(ctx, x, 2) == Catch::Approx(balance.sum()).margin(1e-14));

  // With symmetric rates the N-part cancels in the sum, so the identity
  // holds for any symmetric junction matrix.
  ModelSpec sym = model;
  for (int a : {1, 2, 7})
    for (int b : {1, 2, 7})
      if (a != b) sym.coupling.gamma[{2, a, b}] = 0.9;
  const AssemblyContext ctx_sym = make_context(domain, meshes, sym);
  const Eigen::VectorXd balance_sym = junction_flux_balance(ctx_sym, x, 2);
  CHECK(kirchhoff_residual(ctx_sym, x, 2) == Catch::Approx(balance_sym.sum()).margin(1e-14));
}

TEST_CASE("l2 errors of interpolants") {
  SquareProblem prob(0.125);
  DiscreteState x = make_zero_state(prob.ctx.layout, prob.meshes);

  // The P1 interpolant of an affine function is exact: error ~ 0.
  const auto& mesh = prob.meshes.subdomain_mesh(1);
  for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
    x.u[0][static_cast<Eigen::Index>(n)] = 2.0 * mesh.nodes[n].x() - mesh.nodes[n].y() + 0.5;
  const double affine_err = l2_error_subdomain(
      prob.ctx, x, 1, [](const Vec2& p) { return 2.0 * p.x() - p.y() + 0.5; });
  CHECK(affine_err <= 1e-13);

  // Zero field against the constant 1: the L2 norm of 1 over area 1.
  DiscreteState zero = make_zero_state(prob.ctx.layout, prob.meshes);
  const double const_err =
      l2_error_subdomain(prob.ctx, zero, 1, [](const Vec2&) { return 1.0; });
  CHECK(const_err == Catch::Approx(1.0).epsilon(1e-12));

  // Edge version: w = arclength interpolates exactly; zero vs 1 gives
  // sqrt(length) = 1.
  const int eid = prob.ctx.layout.edge_ids.front();
  const auto& em = prob.meshes.edge_mesh(eid);
  const int pos = prob.ctx.layout.edge_pos.at(eid);
  for (std::size_t m = 0; m < em.nodes.size(); ++m)
    x.w[pos][static_cast<Eigen::Index>(m)] = em.nodes[m];
  CHECK(l2_error_edge(prob.ctx, x, eid, [](double s) { return s; }) <= 1e-13);
  CHECK(l2_error_edge(prob.ctx, zero, eid, [](double) { return 1.0; }) ==
        Catch::Approx(1.0).epsilon(1e-12));

  // Interpolation error of a genuinely curved function decays at second
  // order: the h = 1/8 error is about a quarter of the h = 1/4 one.
  SquareProblem coarse(0.25);
  auto curved = [](const Vec2& p) { return std::sin(M_PI * p.x()) * std::sin(M_PI * p.y()); };
  auto interpolate = [&](SquareProblem& pr) {
    DiscreteState y = make_zero_state(pr.ctx.layout, pr.meshes);
    const auto& m = pr.meshes.subdomain_mesh(1);
    for (std::size_t n = 0; n < m.nodes.size(); ++n)
      y.u[0][static_cast<Eigen::Index>(n)] = curved(m.nodes[n]);
    return l2_error_subdomain(pr.ctx, y, 1, curved);
  };
  const double err_coarse = interpolate(coarse);
  const double err_fine = interpolate(prob);
  CHECK(err_coarse / err_fine == Catch::Approx(4.0).epsilon(0.25));
}
