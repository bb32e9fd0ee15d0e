#pragma once

// P1 finite element assembly of the coupled bulk / edge / vertex system.
//
// Unknown layout (one flat vector): subdomain nodal values in domain order,
// then edge nodal values, then one scalar per vertex.  Unpopulated vertices
// keep a zero slot whose equation reduces to dz/dt = 0; this keeps the
// layout uniform without changing the dynamics.
//
// The backward Euler residual assembled here is, block by block,
//   u_i:  M (u - u_prev)/dt + div-form kappa stiffness + f(u) mass
//         - sum over incident edges of the Robin term (alpha w - beta u),
//   w_j:  M (w - w_prev)/dt + eta stiffness + g(w) mass
//         + the same Robin term tested on the edge
//         + junction rows  (delta_j + sum_m gamma_{j->m}) w_j
//                          - sum_m gamma_{m->j} w_m - lambda_j z    at each endpoint,
//   z_k:  (z - z_prev)/dt - sum_j (delta_j w_j(v_k) - lambda_j z).
//
// The Robin integrand is evaluated once per facet quadrature point and
// scattered to both the u and the w rows with the same weights, so the
// exchange terms cancel exactly in the total-mass functional.
//
// Quadrature: 3-point edge-midpoint rule on triangles, 2-point Gauss on edge
// cells and boundary facets (degree 2 and 3 exactness; the P1 stiffness
// integrands are elementwise constant and integrated exactly).

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "netdiff/geometry.hpp"
#include "netdiff/mesh.hpp"
#include "netdiff/model.hpp"

namespace netdiff {

// --- junction system ---------------------------------------------------------

// Transfer matrix N, absorption matrix E = diag(delta) and release vector
// lambda at one vertex, with rows/columns following edge_order (ascending
// incident edge ids):
//   N(n,m) = -gamma_{m->n}  (n != m),   N(n,n) = sum_{m != n} gamma_{n->m}.
// Column sums of N vanish identically; row sums vanish iff gamma is
// symmetric at the vertex.
struct JunctionSystem {
  int vertex_id = -1;
  std::vector<int> edge_order;
  Eigen::MatrixXd N;
  Eigen::MatrixXd E;
  Eigen::VectorXd lambda;
  bool populated = false;
};

inline JunctionSystem build_junction_system(const PartitionedDomain& domain,
                                            const ModelSpec& model, int vertex_id) {
  JunctionSystem js;
  js.vertex_id = vertex_id;
  for (const auto& inc : edges_at_vertex(domain, vertex_id)) js.edge_order.push_back(inc.edge_id);
  const int d = static_cast<int>(js.edge_order.size());
  js.N = Eigen::MatrixXd::Zero(d, d);
  js.E = Eigen::MatrixXd::Zero(d, d);
  js.lambda = Eigen::VectorXd::Zero(d);
  for (int n = 0; n < d; ++n) {
    for (int m = 0; m < d; ++m) {
      if (n == m) continue;
      js.N(n, m) = -model.coupling.gamma_at(vertex_id, js.edge_order[m], js.edge_order[n]);
      js.N(n, n) += model.coupling.gamma_at(vertex_id, js.edge_order[n], js.edge_order[m]);
    }
    js.E(n, n) = model.coupling.delta_at(vertex_id, js.edge_order[n]);
    js.lambda[n] = model.coupling.lambda_at(vertex_id, js.edge_order[n]);
    if (js.E(n, n) > 0.0 || js.lambda[n] > 0.0) js.populated = true;
  }
  return js;
}

// --- state and layout ----------------------------------------------------------

struct BlockLayout {
  std::vector<int> subdomain_ids;
  std::vector<int> edge_ids;
  std::vector<int> vertex_ids;
  std::vector<Eigen::Index> u_offset;
  std::vector<Eigen::Index> w_offset;
  Eigen::Index z_offset = 0;
  Eigen::Index size = 0;
  std::map<int, int> subdomain_pos;
  std::map<int, int> edge_pos;
  std::map<int, int> vertex_pos;
};

inline BlockLayout make_layout(const PartitionedDomain& domain, const MeshSet& meshes) {
  BlockLayout out;
  Eigen::Index at = 0;
  for (const auto& s : domain.subdomains) {
    out.subdomain_pos[s.id] = static_cast<int>(out.subdomain_ids.size());
    out.subdomain_ids.push_back(s.id);
    out.u_offset.push_back(at);
    at += static_cast<Eigen::Index>(meshes.subdomain_mesh(s.id).nodes.size());
  }
  for (const auto& e : domain.edges) {
    out.edge_pos[e.id] = static_cast<int>(out.edge_ids.size());
    out.edge_ids.push_back(e.id);
    out.w_offset.push_back(at);
    at += static_cast<Eigen::Index>(meshes.edge_mesh(e.id).nodes.size());
  }
  out.z_offset = at;
  for (const auto& v : domain.vertices) {
    out.vertex_pos[v.id] = static_cast<int>(out.vertex_ids.size());
    out.vertex_ids.push_back(v.id);
    ++at;
  }
  out.size = at;
  return out;
}

struct DiscreteState {
  std::vector<Eigen::VectorXd> u;  // per subdomain, layout order
  std::vector<Eigen::VectorXd> w;  // per edge, layout order
  Eigen::VectorXd z;               // per vertex, layout order
};

inline DiscreteState make_zero_state(const BlockLayout& layout, const MeshSet& meshes) {
  DiscreteState x;
  for (int id : layout.subdomain_ids)
    x.u.push_back(Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(meshes.subdomain_mesh(id).nodes.size())));
  for (int id : layout.edge_ids)
    x.w.push_back(
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(meshes.edge_mesh(id).nodes.size())));
  x.z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.vertex_ids.size()));
  return x;
}

inline Eigen::VectorXd flatten(const BlockLayout& layout, const DiscreteState& x) {
  Eigen::VectorXd out(layout.size);
  for (std::size_t i = 0; i < x.u.size(); ++i) out.segment(layout.u_offset[i], x.u[i].size()) = x.u[i];
  for (std::size_t j = 0; j < x.w.size(); ++j) out.segment(layout.w_offset[j], x.w[j].size()) = x.w[j];
  out.segment(layout.z_offset, x.z.size()) = x.z;
  return out;
}

inline DiscreteState unflatten(const BlockLayout& layout, const MeshSet& meshes,
                               const Eigen::VectorXd& v) {
  DiscreteState x = make_zero_state(layout, meshes);
  for (std::size_t i = 0; i < x.u.size(); ++i) x.u[i] = v.segment(layout.u_offset[i], x.u[i].size());
  for (std::size_t j = 0; j < x.w.size(); ++j) x.w[j] = v.segment(layout.w_offset[j], x.w[j].size());
  x.z = v.segment(layout.z_offset, x.z.size());
  return x;
}

// --- precomputed assembly data ---------------------------------------------------

using SourceFn2D = std::function<double(double t, const Vec2& x)>;
using SourceFn1D = std::function<double(double t, double arclength)>;

namespace detail {

struct TriElement {
  std::array<int, 3> n;
  double area = 0.0;
  std::array<Vec2, 3> grad;            // P1 basis gradients (constant)
  std::array<Vec2, 3> quad_point;      // edge midpoints
};

// Barycentric coordinates of the edge-midpoint quadrature points; row q holds
// the three P1 basis values at point q, each with weight area / 3.
inline const std::array<std::array<double, 3>, 3>& tri_quad_basis() {
  static const std::array<std::array<double, 3>, 3> b = {{{0.5, 0.5, 0.0},
                                                          {0.0, 0.5, 0.5},
                                                          {0.5, 0.0, 0.5}}};
  return b;
}

// 2-point Gauss rule on [0,1]: positions and weight 1/2 each.
inline const std::array<double, 2>& gauss2() {
  static const std::array<double, 2> xi = {0.5 - 0.5 / std::sqrt(3.0),
                                           0.5 + 0.5 / std::sqrt(3.0)};
  return xi;
}

struct SubAssembly {
  int pos = -1;  // layout position
  std::vector<TriElement> tris;
};

struct EdgeCellData {
  double length = 0.0;
  std::array<double, 2> mid_arclength;  // Gauss point arclengths
};

struct EdgeAssembly {
  int pos = -1;
  std::vector<EdgeCellData> cells;
};

// One (subdomain, edge) Robin incidence: aligned facet data.
struct CoupleAssembly {
  int sub_pos = -1;
  int edge_pos = -1;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<BoundaryFacet> facets;   // subdomain node pairs, arclength order
  std::vector<double> facet_length;    // edge-mesh cell lengths
};

struct VertexAssembly {
  int pos = -1;
  JunctionSystem junction;
  std::vector<int> edge_pos;        // aligned with junction.edge_order
  std::vector<int> endpoint_node;   // node index within each edge mesh
};

}  // namespace detail

struct AssemblyContext {
  const PartitionedDomain* domain = nullptr;
  const MeshSet* meshes = nullptr;
  const ModelSpec* model = nullptr;
  BlockLayout layout;
  std::vector<detail::SubAssembly> subs;
  std::vector<detail::EdgeAssembly> edge_blocks;
  std::vector<detail::CoupleAssembly> couples;
  std::vector<detail::VertexAssembly> verts;
  std::map<int, SourceFn2D> u_sources;  // by subdomain id
  std::map<int, SourceFn1D> w_sources;  // by edge id
  int threads = 1;
};

inline AssemblyContext make_context(const PartitionedDomain& domain, const MeshSet& meshes,
                                    const ModelSpec& model) {
  AssemblyContext ctx;
  ctx.domain = &domain;
  ctx.meshes = &meshes;
  ctx.model = &model;
  ctx.layout = make_layout(domain, meshes);

  for (const auto& sm : meshes.subdomains) {
    detail::SubAssembly sa;
    sa.pos = ctx.layout.subdomain_pos.at(sm.subdomain_id);
    for (const auto& t : sm.triangles) {
      detail::TriElement el;
      el.n = t;
      const Vec2 &p0 = sm.nodes[t[0]], &p1 = sm.nodes[t[1]], &p2 = sm.nodes[t[2]];
      const double twice = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                           (p2.x() - p0.x()) * (p1.y() - p0.y());
      if (!(twice > 0.0))
        throw std::runtime_error("degenerate triangle in subdomain mesh " +
                                 std::to_string(sm.subdomain_id));
      el.area = 0.5 * twice;
      el.grad[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / twice;
      el.grad[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / twice;
      el.grad[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / twice;
      el.quad_point[0] = 0.5 * (p0 + p1);
      el.quad_point[1] = 0.5 * (p1 + p2);
      el.quad_point[2] = 0.5 * (p2 + p0);
      sa.tris.push_back(el);
    }
    ctx.subs.push_back(std::move(sa));
  }

  for (const auto& em : meshes.edges) {
    detail::EdgeAssembly ea;
    ea.pos = ctx.layout.edge_pos.at(em.edge_id);
    for (int c = 0; c < em.cell_count(); ++c) {
      detail::EdgeCellData cell;
      cell.length = em.nodes[c + 1] - em.nodes[c];
      for (int q = 0; q < 2; ++q)
        cell.mid_arclength[q] = em.nodes[c] + detail::gauss2()[q] * cell.length;
      ea.cells.push_back(cell);
    }
    ctx.edge_blocks.push_back(std::move(ea));
  }

  for (const auto& e : domain.edges) {
    for (int sid : e.adjacent_subdomains) {
      detail::CoupleAssembly ca;
      ca.sub_pos = ctx.layout.subdomain_pos.at(sid);
      ca.edge_pos = ctx.layout.edge_pos.at(e.id);
      ca.alpha = model.coupling.alpha_at(sid, e.id);
      ca.beta = model.coupling.beta_at(sid, e.id);
      ca.facets = meshes.subdomain_mesh(sid).edge_facets.at(e.id);
      const EdgeMesh& em = meshes.edge_mesh(e.id);
      for (int c = 0; c < em.cell_count(); ++c)
        ca.facet_length.push_back(em.nodes[c + 1] - em.nodes[c]);
      if (ca.facets.size() != ca.facet_length.size())
        throw std::runtime_error("facet/edge-cell mismatch on edge " + std::to_string(e.id));
      ctx.couples.push_back(std::move(ca));
    }
  }

  for (const auto& v : domain.vertices) {
    detail::VertexAssembly va;
    va.pos = ctx.layout.vertex_pos.at(v.id);
    va.junction = build_junction_system(domain, model, v.id);
    for (int eid : va.junction.edge_order) {
      va.edge_pos.push_back(ctx.layout.edge_pos.at(eid));
      va.endpoint_node.push_back(meshes.vertex_trace.at(eid, v.id));
    }
    ctx.verts.push_back(std::move(va));
  }

  return ctx;
}

namespace detail {

template <class Fn>
inline void parallel_over(int count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const int workers = std::min(threads, count);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&fn, w, workers, count]() {
      for (int i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline double source_value(const std::map<int, SourceFn2D>& sources, int id, double t,
                           const Vec2& x) {
  auto it = sources.find(id);
  return it == sources.end() || !it->second ? 0.0 : it->second(t, x);
}

inline double source_value(const std::map<int, SourceFn1D>& sources, int id, double t,
                           double s) {
  auto it = sources.find(id);
  return it == sources.end() || !it->second ? 0.0 : it->second(t, s);
}

}  // namespace detail

// Backward Euler residual at time t_new with step dt.  freeze_z zeroes the
// vertex rows (used by the splitting scheme, which advances z separately).
inline Eigen::VectorXd assemble_residual(const AssemblyContext& ctx, const DiscreteState& x,
                                         const DiscreteState& x_prev, double dt, double t_new,
                                         bool freeze_z = false) {
  const BlockLayout& L = ctx.layout;
  const ModelSpec& model = *ctx.model;
  Eigen::VectorXd R = Eigen::VectorXd::Zero(L.size);

  // Subdomain volume terms (disjoint u blocks; safe to run in parallel).
  detail::parallel_over(static_cast<int>(ctx.subs.size()), ctx.threads, [&](int si) {
    const auto& sa = ctx.subs[si];
    const int sub_id = L.subdomain_ids[sa.pos];
    const Eigen::VectorXd& u = x.u[sa.pos];
    const Eigen::VectorXd& up = x_prev.u[sa.pos];
    auto row = R.segment(L.u_offset[sa.pos], u.size());
    for (const auto& el : sa.tris) {
      Vec2 grad_u = Vec2::Zero();
      for (int k = 0; k < 3; ++k) grad_u += u[el.n[k]] * el.grad[k];
      const Vec2 flux = flux_eval(model.subdomain_flux, grad_u);
      for (int k = 0; k < 3; ++k) row[el.n[k]] += el.area * flux.dot(el.grad[k]);
      const double wq = el.area / 3.0;
      for (int q = 0; q < 3; ++q) {
        const auto& phi = detail::tri_quad_basis()[q];
        double uq = 0.0, upq = 0.0;
        for (int k = 0; k < 3; ++k) {
          uq += phi[k] * u[el.n[k]];
          upq += phi[k] * up[el.n[k]];
        }
        const double val = (uq - upq) / dt + reaction_eval(model.subdomain_reaction, uq) -
                           detail::source_value(ctx.u_sources, sub_id, t_new, el.quad_point[q]);
        for (int k = 0; k < 3; ++k) row[el.n[k]] += wq * val * phi[k];
      }
    }
  });

  // Edge volume terms (disjoint w blocks).
  detail::parallel_over(static_cast<int>(ctx.edge_blocks.size()), ctx.threads, [&](int ei) {
    const auto& ea = ctx.edge_blocks[ei];
    const int edge_id = L.edge_ids[ea.pos];
    const Eigen::VectorXd& w = x.w[ea.pos];
    const Eigen::VectorXd& wp = x_prev.w[ea.pos];
    auto row = R.segment(L.w_offset[ea.pos], w.size());
    for (std::size_t c = 0; c < ea.cells.size(); ++c) {
      const auto& cell = ea.cells[c];
      const double dw = (w[c + 1] - w[c]) / cell.length;
      const double flux = flux_eval(model.edge_flux, dw);
      row[c] -= flux;
      row[c + 1] += flux;
      for (int q = 0; q < 2; ++q) {
        const double xi = detail::gauss2()[q];
        const double psi0 = 1.0 - xi, psi1 = xi;
        const double wq = psi0 * w[c] + psi1 * w[c + 1];
        const double wpq = psi0 * wp[c] + psi1 * wp[c + 1];
        const double val =
            (wq - wpq) / dt + reaction_eval(model.edge_reaction, wq) -
            detail::source_value(ctx.w_sources, edge_id, t_new, cell.mid_arclength[q]);
        const double weight = 0.5 * cell.length;
        row[c] += weight * val * psi0;
        row[c + 1] += weight * val * psi1;
      }
    }
  });

  // Robin exchange: one quadrature pass per facet feeding both blocks, so the
  // exchange contributions cancel exactly in the sum of all residual entries.
  for (const auto& ca : ctx.couples) {
    const Eigen::VectorXd& u = x.u[ca.sub_pos];
    const Eigen::VectorXd& w = x.w[ca.edge_pos];
    auto urow = R.segment(L.u_offset[ca.sub_pos], u.size());
    auto wrow = R.segment(L.w_offset[ca.edge_pos], w.size());
    for (std::size_t m = 0; m < ca.facets.size(); ++m) {
      const auto& f = ca.facets[m];
      const double weight = 0.5 * ca.facet_length[m];
      for (int q = 0; q < 2; ++q) {
        const double xi = detail::gauss2()[q];
        const double phi0 = 1.0 - xi, phi1 = xi;
        const double uq = phi0 * u[f.a] + phi1 * u[f.b];
        const double wq = phi0 * w[m] + phi1 * w[m + 1];
        const double exch = weight * (ca.alpha * wq - ca.beta * uq);
        urow[f.a] -= exch * phi0;
        urow[f.b] -= exch * phi1;
        wrow[m] += exch * phi0;
        wrow[m + 1] += exch * phi1;
      }
    }
  }

  // Junction rows and vertex equations.
  for (const auto& va : ctx.verts) {
    const auto& js = va.junction;
    const int d = static_cast<int>(js.edge_order.size());
    const double zk = x.z[va.pos];
    double dz_rhs = 0.0;
    for (int n = 0; n < d; ++n) {
      const double wn = x.w[va.edge_pos[n]][va.endpoint_node[n]];
      double junction = (js.E(n, n) + js.N(n, n)) * wn - js.lambda[n] * zk;
      for (int m = 0; m < d; ++m) {
        if (m == n) continue;
        junction += js.N(n, m) * x.w[va.edge_pos[m]][va.endpoint_node[m]];
      }
      R[L.w_offset[va.edge_pos[n]] + va.endpoint_node[n]] += junction;
      dz_rhs += js.E(n, n) * wn - js.lambda[n] * zk;
    }
    if (!freeze_z)
      R[L.z_offset + va.pos] = (zk - x_prev.z[va.pos]) / dt - dz_rhs;
  }

  return R;
}

// Exact tangent of assemble_residual.  With freeze_z the vertex rows become
// identity rows, so Newton updates leave z untouched.
inline Eigen::SparseMatrix<double> assemble_tangent(const AssemblyContext& ctx,
                                                    const DiscreteState& x, double dt,
                                                    bool freeze_z = false) {
  const BlockLayout& L = ctx.layout;
  const ModelSpec& model = *ctx.model;
  using Trip = Eigen::Triplet<double>;

  // Per-subdomain and per-edge triplet buffers keep the merge order (and so
  // the assembled matrix) independent of the thread count.
  std::vector<std::vector<Trip>> sub_trips(ctx.subs.size());
  std::vector<std::vector<Trip>> edge_trips(ctx.edge_blocks.size());
  std::vector<Trip> trips;

  detail::parallel_over(static_cast<int>(ctx.subs.size()), ctx.threads, [&](int si) {
    const auto& sa = ctx.subs[si];
    const Eigen::VectorXd& u = x.u[sa.pos];
    const Eigen::Index off = L.u_offset[sa.pos];
    auto& out = sub_trips[si];
    out.reserve(sa.tris.size() * 9);
    for (const auto& el : sa.tris) {
      Vec2 grad_u = Vec2::Zero();
      for (int k = 0; k < 3; ++k) grad_u += u[el.n[k]] * el.grad[k];
      const Eigen::Matrix2d J = flux_jacobian(model.subdomain_flux, grad_u);
      std::array<std::array<double, 3>, 3> local{};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) local[a][b] = el.area * el.grad[a].dot(J * el.grad[b]);
      const double wq = el.area / 3.0;
      for (int q = 0; q < 3; ++q) {
        const auto& phi = detail::tri_quad_basis()[q];
        double uq = 0.0;
        for (int k = 0; k < 3; ++k) uq += phi[k] * u[el.n[k]];
        const double fac = 1.0 / dt + reaction_derivative(model.subdomain_reaction, uq);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) local[a][b] += wq * fac * phi[a] * phi[b];
      }
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          out.emplace_back(off + el.n[a], off + el.n[b], local[a][b]);
    }
  });

  detail::parallel_over(static_cast<int>(ctx.edge_blocks.size()), ctx.threads, [&](int ei) {
    const auto& ea = ctx.edge_blocks[ei];
    const Eigen::VectorXd& w = x.w[ea.pos];
    const Eigen::Index off = L.w_offset[ea.pos];
    auto& out = edge_trips[ei];
    out.reserve(ea.cells.size() * 4);
    for (std::size_t c = 0; c < ea.cells.size(); ++c) {
      const auto& cell = ea.cells[c];
      const double dw = (w[c + 1] - w[c]) / cell.length;
      const double eta_p = flux_jacobian(model.edge_flux, dw) / cell.length;
      std::array<std::array<double, 2>, 2> local = {{{eta_p, -eta_p}, {-eta_p, eta_p}}};
      for (int q = 0; q < 2; ++q) {
        const double xi = detail::gauss2()[q];
        const std::array<double, 2> psi = {1.0 - xi, xi};
        const double wq = psi[0] * w[c] + psi[1] * w[c + 1];
        const double fac = 1.0 / dt + reaction_derivative(model.edge_reaction, wq);
        const double weight = 0.5 * cell.length;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) local[a][b] += weight * fac * psi[a] * psi[b];
      }
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          out.emplace_back(off + c + a, off + c + b, local[a][b]);
    }
  });

  for (auto& buf : sub_trips)
    trips.insert(trips.end(), buf.begin(), buf.end());
  for (auto& buf : edge_trips)
    trips.insert(trips.end(), buf.begin(), buf.end());

  for (const auto& ca : ctx.couples) {
    const Eigen::Index uoff = L.u_offset[ca.sub_pos];
    const Eigen::Index woff = L.w_offset[ca.edge_pos];
    for (std::size_t m = 0; m < ca.facets.size(); ++m) {
      const auto& f = ca.facets[m];
      const std::array<Eigen::Index, 2> urow = {uoff + f.a, uoff + f.b};
      const std::array<Eigen::Index, 2> wrow = {woff + static_cast<Eigen::Index>(m),
                                                woff + static_cast<Eigen::Index>(m) + 1};
      const double weight = 0.5 * ca.facet_length[m];
      for (int q = 0; q < 2; ++q) {
        const double xi = detail::gauss2()[q];
        const std::array<double, 2> phi = {1.0 - xi, xi};
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const double mass = weight * phi[a] * phi[b];
            trips.emplace_back(urow[a], urow[b], ca.beta * mass);
            trips.emplace_back(urow[a], wrow[b], -ca.alpha * mass);
            trips.emplace_back(wrow[a], wrow[b], ca.alpha * mass);
            trips.emplace_back(wrow[a], urow[b], -ca.beta * mass);
          }
      }
    }
  }

  for (const auto& va : ctx.verts) {
    const auto& js = va.junction;
    const int d = static_cast<int>(js.edge_order.size());
    const Eigen::Index zrow = L.z_offset + va.pos;
    double lambda_sum = 0.0;
    for (int n = 0; n < d; ++n) {
      const Eigen::Index wn_row = L.w_offset[va.edge_pos[n]] + va.endpoint_node[n];
      trips.emplace_back(wn_row, wn_row, js.E(n, n) + js.N(n, n));
      for (int m = 0; m < d; ++m) {
        if (m == n || js.N(n, m) == 0.0) continue;
        trips.emplace_back(wn_row, L.w_offset[va.edge_pos[m]] + va.endpoint_node[m], js.N(n, m));
      }
      if (js.lambda[n] != 0.0) trips.emplace_back(wn_row, zrow, -js.lambda[n]);
      lambda_sum += js.lambda[n];
      if (!freeze_z && js.E(n, n) != 0.0) trips.emplace_back(zrow, wn_row, -js.E(n, n));
    }
    if (freeze_z)
      trips.emplace_back(zrow, zrow, 1.0);
    else
      trips.emplace_back(zrow, zrow, 1.0 / dt + lambda_sum);
  }

  Eigen::SparseMatrix<double> J(L.size, L.size);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

// Per-edge junction balance at a vertex: eta(outward one-sided slope) plus
// the junction row ((N+E) w - z lambda), in ascending incident-edge order.
// All components vanish when the discrete solution satisfies the junction
// conditions exactly.
inline Eigen::VectorXd junction_flux_balance(const AssemblyContext& ctx, const DiscreteState& x,
                                             int vertex_id) {
  const detail::VertexAssembly* va = nullptr;
  for (const auto& cand : ctx.verts)
    if (ctx.layout.vertex_ids[cand.pos] == vertex_id) va = &cand;
  if (!va) throw std::out_of_range("unknown vertex id " + std::to_string(vertex_id));

  const auto& js = va->junction;
  const int d = static_cast<int>(js.edge_order.size());
  Eigen::VectorXd balance(d);
  for (int n = 0; n < d; ++n) {
    const Eigen::VectorXd& w = x.w[va->edge_pos[n]];
    const EdgeMesh& em = ctx.meshes->edge_mesh(js.edge_order[n]);
    const int node = va->endpoint_node[n];
    double slope;  // one-sided derivative oriented out of the edge
    if (node == 0)
      slope = (w[0] - w[1]) / (em.nodes[1] - em.nodes[0]);
    else
      slope = (w[node] - w[node - 1]) / (em.nodes[node] - em.nodes[node - 1]);
    double row = flux_eval(ctx.model->edge_flux, slope);
    row += (js.E(n, n) + js.N(n, n)) * w[node] - js.lambda[n] * x.z[va->pos];
    for (int m = 0; m < d; ++m) {
      if (m == n) continue;
      row += js.N(n, m) * x.w[va->edge_pos[m]][va->endpoint_node[m]];
    }
    balance[n] = row;
  }
  return balance;
}

}  // namespace netdiff
