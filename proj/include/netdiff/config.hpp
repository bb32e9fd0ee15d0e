#pragma once

// JSON run configuration.
//
// parse_config() maps a JSON document onto the geometry, model, solver and
// output structures with strict validation: unknown fields are rejected (no
// silent ignoring), every error carries the JSON path, and coefficient
// entries must reference incident (subdomain, edge) or (vertex, edge) pairs.
// Absent optional fields take documented defaults (dt = 1e-2,
// newton_tol = 1e-10, zero initial data, ...).  to_json() is the canonical
// serialization: sorted object keys, id-sorted arrays; re-parsing it
// reproduces the configuration, and config_hash() (FNV-1a over the compact
// dump, outputs block excluded) is the fingerprint recorded in run summaries.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "netdiff/expression.hpp"
#include "netdiff/geometry.hpp"
#include "netdiff/mesh.hpp"
#include "netdiff/model.hpp"
#include "netdiff/timestepper.hpp"

namespace netdiff {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct OutputOptions {
  std::string directory = "out";
  std::string diagnostics_csv = "diagnostics.csv";
  std::string summary_json = "summary.json";
  bool write_vtk = false;
  int vtk_every = 1;
};

struct VertexLimitSection {
  bool present = false;
  double L = 1.0;
  double theta = 1.0;
  double mu = 1.0;
  double lambda = 0.0;
  ReactionLaw edge_reaction;
  double h = 0.01;
  double dt = 1e-3;
  double t_end = 0.5;
  Expression u0;
  Expression v0;
  double w0 = 0.0;
  std::vector<double> deltas;
  double newton_tol = 1e-12;
  int newton_max_iter = 30;
};

struct RunConfig {
  PartitionedDomain domain;
  ModelSpec model;
  double h = 0.1;
  MeshOptions::Generator mesh_generator = MeshOptions::Generator::automatic;
  SolverConfig solver;
  std::map<int, Expression> initial_u;  // by subdomain id; absent = zero
  std::map<int, Expression> initial_w;  // by edge id
  std::map<int, double> initial_z;      // by vertex id
  std::map<int, Expression> source_u;
  std::map<int, Expression> source_w;
  OutputOptions outputs;
  VertexLimitSection vertex_limit;
};

namespace cfg {

inline std::string joined(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path.empty() ? what : path + ": " + what);
}

inline void check_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) fail(joined(path, key), "unknown field (rejected, check the spelling)");
  }
}

inline const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double to_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline int to_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

inline bool to_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

inline std::string to_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline double number_or(const json& obj, const char* key, const std::string& path,
                        double fallback) {
  const json* j = find(obj, key);
  return j ? to_number(*j, joined(path, key)) : fallback;
}

inline int int_or(const json& obj, const char* key, const std::string& path, int fallback) {
  const json* j = find(obj, key);
  return j ? to_int(*j, joined(path, key)) : fallback;
}

inline bool bool_or(const json& obj, const char* key, const std::string& path, bool fallback) {
  const json* j = find(obj, key);
  return j ? to_bool(*j, joined(path, key)) : fallback;
}

inline std::string string_or(const json& obj, const char* key, const std::string& path,
                             const std::string& fallback) {
  const json* j = find(obj, key);
  return j ? to_string(*j, joined(path, key)) : fallback;
}

inline Expression parse_expression(const json& j, const std::string& path, bool allow_time) {
  const std::string text = to_string(j, path);
  try {
    Expression e = Expression::parse(text);
    if (!allow_time && e.uses_time())
      fail(path, "the variable t is only available in source expressions");
    return e;
  } catch (const ExpressionError& err) {
    fail(path, std::string("bad expression: ") + err.what());
  }
}

inline FluxLaw parse_flux(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, path, {"p", "variant", "epsilon"});
  FluxLaw law;
  law.p = number_or(j, "p", path, 2.0);
  law.epsilon = number_or(j, "epsilon", path, 1e-8);
  const std::string variant = string_or(j, "variant", path, "pure_power");
  if (variant == "pure_power")
    law.variant = FluxVariant::pure_power;
  else if (variant == "linear_plus_power")
    law.variant = FluxVariant::linear_plus_power;
  else
    fail(joined(path, "variant"), "expected \"pure_power\" or \"linear_plus_power\"");
  if (!(law.p >= 2.0)) fail(joined(path, "p"), "power index must satisfy p >= 2");
  if (law.epsilon < 0.0) fail(joined(path, "epsilon"), "must be non-negative");
  return law;
}

inline ReactionLaw parse_reaction(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, path, {"kind", "coefficient", "exponent"});
  ReactionLaw law;
  const std::string kind = string_or(j, "kind", path, "zero");
  if (kind == "zero")
    law.kind = ReactionKind::zero;
  else if (kind == "linear")
    law.kind = ReactionKind::linear;
  else if (kind == "power")
    law.kind = ReactionKind::power;
  else
    fail(joined(path, "kind"), "expected \"zero\", \"linear\" or \"power\"");
  law.coefficient = number_or(j, "coefficient", path, 0.0);
  law.exponent = number_or(j, "exponent", path, 2.0);
  return law;
}

inline PartitionedDomain parse_geometry(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, path, {"vertices", "edges", "subdomains"});
  PartitionedDomain domain;

  const json* vertices = find(j, "vertices");
  if (!vertices || !vertices->is_array()) fail(joined(path, "vertices"), "expected an array");
  for (std::size_t i = 0; i < vertices->size(); ++i) {
    const std::string vp = joined(path, "vertices[" + std::to_string(i) + "]");
    const json& v = (*vertices)[i];
    check_object(v, vp);
    check_keys(v, vp, {"id", "position"});
    Vertex vertex;
    const json* id = find(v, "id");
    if (!id) fail(vp, "missing field 'id'");
    vertex.id = to_int(*id, joined(vp, "id"));
    const json* pos = find(v, "position");
    if (!pos || !pos->is_array() || pos->size() != 2)
      fail(joined(vp, "position"), "expected [x, y]");
    vertex.position = Vec2(to_number((*pos)[0], joined(vp, "position[0]")),
                           to_number((*pos)[1], joined(vp, "position[1]")));
    domain.vertices.push_back(vertex);
  }

  const json* edges = find(j, "edges");
  if (!edges || !edges->is_array()) fail(joined(path, "edges"), "expected an array");
  for (std::size_t i = 0; i < edges->size(); ++i) {
    const std::string ep = joined(path, "edges[" + std::to_string(i) + "]");
    const json& e = (*edges)[i];
    check_object(e, ep);
    check_keys(e, ep, {"id", "source", "terminal", "length", "subdomains"});
    Edge edge;
    const json* id = find(e, "id");
    if (!id) fail(ep, "missing field 'id'");
    edge.id = to_int(*id, joined(ep, "id"));
    const json* src = find(e, "source");
    const json* ter = find(e, "terminal");
    if (!src || !ter) fail(ep, "edges need 'source' and 'terminal' vertex ids");
    edge.source_vertex = to_int(*src, joined(ep, "source"));
    edge.terminal_vertex = to_int(*ter, joined(ep, "terminal"));
    const json* subs = find(e, "subdomains");
    if (!subs || !subs->is_array() || subs->empty())
      fail(joined(ep, "subdomains"), "expected a non-empty array of subdomain ids");
    for (std::size_t k = 0; k < subs->size(); ++k)
      edge.adjacent_subdomains.push_back(
          to_int((*subs)[k], joined(ep, "subdomains[" + std::to_string(k) + "]")));
    // Stored length defaults to the endpoint distance; an explicit value is
    // validated later by validate_geometry.
    const json* len = find(e, "length");
    if (len) {
      edge.length = to_number(*len, joined(ep, "length"));
    } else {
      const Vertex* a = domain.find_vertex(edge.source_vertex);
      const Vertex* b = domain.find_vertex(edge.terminal_vertex);
      if (!a || !b) fail(ep, "source or terminal vertex is not declared");
      edge.length = (b->position - a->position).norm();
    }
    domain.edges.push_back(edge);
  }

  const json* subdomains = find(j, "subdomains");
  if (!subdomains || !subdomains->is_array())
    fail(joined(path, "subdomains"), "expected an array");
  for (std::size_t i = 0; i < subdomains->size(); ++i) {
    const std::string sp = joined(path, "subdomains[" + std::to_string(i) + "]");
    const json& s = (*subdomains)[i];
    check_object(s, sp);
    check_keys(s, sp, {"id", "loop"});
    Subdomain sub;
    const json* id = find(s, "id");
    if (!id) fail(sp, "missing field 'id'");
    sub.id = to_int(*id, joined(sp, "id"));
    const json* loop = find(s, "loop");
    if (!loop || !loop->is_array()) fail(joined(sp, "loop"), "expected an array");
    for (std::size_t k = 0; k < loop->size(); ++k) {
      const std::string lp = joined(sp, "loop[" + std::to_string(k) + "]");
      const json& leg = (*loop)[k];
      check_object(leg, lp);
      check_keys(leg, lp, {"edge", "reversed"});
      BoundaryLeg bl;
      const json* eid = find(leg, "edge");
      if (!eid) fail(lp, "missing field 'edge'");
      bl.edge_id = to_int(*eid, joined(lp, "edge"));
      bl.reversed = bool_or(leg, "reversed", lp, false);
      sub.boundary_loop.push_back(bl);
    }
    domain.subdomains.push_back(sub);
  }

  return domain;
}

inline void parse_coefficients(const json& j, const std::string& path,
                               const PartitionedDomain& domain, CouplingCoefficients& out) {
  check_object(j, path);
  check_keys(j, path, {"alpha", "beta", "gamma", "delta", "lambda"});

  auto robin_incident = [&domain](int sid, int eid) {
    const Edge* e = domain.find_edge(eid);
    if (!e) return false;
    return std::find(e->adjacent_subdomains.begin(), e->adjacent_subdomains.end(), sid) !=
           e->adjacent_subdomains.end();
  };
  auto vertex_incident = [&domain](int vid, int eid) {
    const Edge* e = domain.find_edge(eid);
    return e && (e->source_vertex == vid || e->terminal_vertex == vid);
  };

  for (const char* name : {"alpha", "beta"}) {
    const json* arr = find(j, name);
    if (!arr) continue;
    if (!arr->is_array()) fail(joined(path, name), "expected an array");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string ip = joined(path, std::string(name) + "[" + std::to_string(i) + "]");
      const json& entry = (*arr)[i];
      check_object(entry, ip);
      check_keys(entry, ip, {"subdomain", "edge", "value"});
      const json *s = find(entry, "subdomain"), *e = find(entry, "edge"), *v = find(entry, "value");
      if (!s || !e || !v) fail(ip, "entries need 'subdomain', 'edge' and 'value'");
      const int sid = to_int(*s, joined(ip, "subdomain"));
      const int eid = to_int(*e, joined(ip, "edge"));
      if (!robin_incident(sid, eid))
        fail(ip, "subdomain " + std::to_string(sid) + " is not adjacent to edge " +
                     std::to_string(eid));
      auto& target = (std::string(name) == "alpha") ? out.alpha : out.beta;
      target[{sid, eid}] = to_number(*v, joined(ip, "value"));
    }
  }

  if (const json* arr = find(j, "gamma")) {
    if (!arr->is_array()) fail(joined(path, "gamma"), "expected an array");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string ip = joined(path, "gamma[" + std::to_string(i) + "]");
      const json& entry = (*arr)[i];
      check_object(entry, ip);
      check_keys(entry, ip, {"vertex", "from", "to", "value"});
      const json *vx = find(entry, "vertex"), *fr = find(entry, "from"), *to = find(entry, "to"),
                 *v = find(entry, "value");
      if (!vx || !fr || !to || !v) fail(ip, "entries need 'vertex', 'from', 'to' and 'value'");
      const int vid = to_int(*vx, joined(ip, "vertex"));
      const int from = to_int(*fr, joined(ip, "from"));
      const int dest = to_int(*to, joined(ip, "to"));
      if (!vertex_incident(vid, from) || !vertex_incident(vid, dest) || from == dest)
        fail(ip, "gamma must connect two distinct edges incident to vertex " +
                     std::to_string(vid));
      out.gamma[{vid, from, dest}] = to_number(*v, joined(ip, "value"));
    }
  }

  for (const char* name : {"delta", "lambda"}) {
    const json* arr = find(j, name);
    if (!arr) continue;
    if (!arr->is_array()) fail(joined(path, name), "expected an array");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string ip = joined(path, std::string(name) + "[" + std::to_string(i) + "]");
      const json& entry = (*arr)[i];
      check_object(entry, ip);
      check_keys(entry, ip, {"vertex", "edge", "value"});
      const json *vx = find(entry, "vertex"), *e = find(entry, "edge"), *v = find(entry, "value");
      if (!vx || !e || !v) fail(ip, "entries need 'vertex', 'edge' and 'value'");
      const int vid = to_int(*vx, joined(ip, "vertex"));
      const int eid = to_int(*e, joined(ip, "edge"));
      if (!vertex_incident(vid, eid))
        fail(ip, "edge " + std::to_string(eid) + " is not incident to vertex " +
                     std::to_string(vid));
      auto& target = (std::string(name) == "delta") ? out.delta : out.lambda;
      target[{vid, eid}] = to_number(*v, joined(ip, "value"));
    }
  }
}

inline void parse_field_expressions(const json& arr, const std::string& path,
                                    const char* id_key, bool allow_time,
                                    std::map<int, Expression>& out) {
  if (!arr.is_array()) fail(path, "expected an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string ip = path + "[" + std::to_string(i) + "]";
    const json& entry = arr[i];
    check_object(entry, ip);
    check_keys(entry, ip, {id_key, "expression"});
    const json* id = find(entry, id_key);
    const json* expr = find(entry, "expression");
    if (!id || !expr) fail(ip, std::string("entries need '") + id_key + "' and 'expression'");
    out[to_int(*id, joined(ip, id_key))] = parse_expression(*expr, joined(ip, "expression"),
                                                            allow_time);
  }
}

}  // namespace cfg

inline RunConfig parse_config(const json& root) {
  cfg::check_object(root, "");
  cfg::check_keys(root, "",
                  {"geometry", "model", "discretization", "initial", "sources", "outputs",
                   "vertex_limit"});
  RunConfig out;

  const json* geometry = cfg::find(root, "geometry");
  if (!geometry) cfg::fail("", "missing required section 'geometry'");
  out.domain = cfg::parse_geometry(*geometry, "geometry");

  const json* model = cfg::find(root, "model");
  if (!model) cfg::fail("", "missing required section 'model'");
  cfg::check_object(*model, "model");
  cfg::check_keys(*model, "model",
                  {"subdomain_flux", "edge_flux", "subdomain_reaction", "edge_reaction",
                   "coefficients"});
  if (const json* f = cfg::find(*model, "subdomain_flux"))
    out.model.subdomain_flux = cfg::parse_flux(*f, "model.subdomain_flux");
  if (const json* f = cfg::find(*model, "edge_flux"))
    out.model.edge_flux = cfg::parse_flux(*f, "model.edge_flux");
  if (const json* r = cfg::find(*model, "subdomain_reaction"))
    out.model.subdomain_reaction = cfg::parse_reaction(*r, "model.subdomain_reaction");
  if (const json* r = cfg::find(*model, "edge_reaction"))
    out.model.edge_reaction = cfg::parse_reaction(*r, "model.edge_reaction");
  if (const json* c = cfg::find(*model, "coefficients"))
    cfg::parse_coefficients(*c, "model.coefficients", out.domain, out.model.coupling);

  if (const json* d = cfg::find(root, "discretization")) {
    cfg::check_object(*d, "discretization");
    cfg::check_keys(*d, "discretization",
                    {"h", "dt", "t_end", "newton_tol", "newton_max_iter", "line_search",
                     "scheme", "fixed_point_tol", "fixed_point_max_iter", "mesh_generator"});
    out.h = cfg::number_or(*d, "h", "discretization", out.h);
    out.solver.dt = cfg::number_or(*d, "dt", "discretization", out.solver.dt);
    out.solver.t_end = cfg::number_or(*d, "t_end", "discretization", out.solver.t_end);
    out.solver.newton_tol =
        cfg::number_or(*d, "newton_tol", "discretization", out.solver.newton_tol);
    out.solver.newton_max_iter =
        cfg::int_or(*d, "newton_max_iter", "discretization", out.solver.newton_max_iter);
    out.solver.line_search =
        cfg::bool_or(*d, "line_search", "discretization", out.solver.line_search);
    out.solver.fixed_point_tol =
        cfg::number_or(*d, "fixed_point_tol", "discretization", out.solver.fixed_point_tol);
    out.solver.fixed_point_max_iter = cfg::int_or(*d, "fixed_point_max_iter", "discretization",
                                                  out.solver.fixed_point_max_iter);
    const std::string scheme = cfg::string_or(*d, "scheme", "discretization", "monolithic");
    if (scheme == "monolithic")
      out.solver.scheme = SolverConfig::Scheme::monolithic;
    else if (scheme == "splitting")
      out.solver.scheme = SolverConfig::Scheme::splitting;
    else
      cfg::fail("discretization.scheme", "expected \"monolithic\" or \"splitting\"");
    const std::string generator =
        cfg::string_or(*d, "mesh_generator", "discretization", "auto");
    if (generator == "auto")
      out.mesh_generator = MeshOptions::Generator::automatic;
    else if (generator == "structured")
      out.mesh_generator = MeshOptions::Generator::structured;
    else if (generator == "delaunay")
      out.mesh_generator = MeshOptions::Generator::delaunay;
    else
      cfg::fail("discretization.mesh_generator",
                "expected \"auto\", \"structured\" or \"delaunay\"");
    if (!(out.h > 0.0)) cfg::fail("discretization.h", "mesh size must be positive");
    if (!(out.solver.dt > 0.0)) cfg::fail("discretization.dt", "time step must be positive");
  }

  if (const json* init = cfg::find(root, "initial")) {
    cfg::check_object(*init, "initial");
    cfg::check_keys(*init, "initial", {"u", "w", "z"});
    if (const json* u = cfg::find(*init, "u"))
      cfg::parse_field_expressions(*u, "initial.u", "subdomain", false, out.initial_u);
    if (const json* w = cfg::find(*init, "w"))
      cfg::parse_field_expressions(*w, "initial.w", "edge", false, out.initial_w);
    if (const json* z = cfg::find(*init, "z")) {
      if (!z->is_array()) cfg::fail("initial.z", "expected an array");
      for (std::size_t i = 0; i < z->size(); ++i) {
        const std::string ip = "initial.z[" + std::to_string(i) + "]";
        const json& entry = (*z)[i];
        cfg::check_object(entry, ip);
        cfg::check_keys(entry, ip, {"vertex", "value"});
        const json* vx = cfg::find(entry, "vertex");
        const json* v = cfg::find(entry, "value");
        if (!vx || !v) cfg::fail(ip, "entries need 'vertex' and 'value'");
        out.initial_z[cfg::to_int(*vx, cfg::joined(ip, "vertex"))] =
            cfg::to_number(*v, cfg::joined(ip, "value"));
      }
    }
    for (const auto& [id, expr] : out.initial_u)
      if (!out.domain.find_subdomain(id))
        cfg::fail("initial.u", "unknown subdomain id " + std::to_string(id));
    for (const auto& [id, expr] : out.initial_w)
      if (!out.domain.find_edge(id))
        cfg::fail("initial.w", "unknown edge id " + std::to_string(id));
    for (const auto& [id, value] : out.initial_z)
      if (!out.domain.find_vertex(id))
        cfg::fail("initial.z", "unknown vertex id " + std::to_string(id));
  }

  if (const json* sources = cfg::find(root, "sources")) {
    cfg::check_object(*sources, "sources");
    cfg::check_keys(*sources, "sources", {"u", "w"});
    if (const json* u = cfg::find(*sources, "u"))
      cfg::parse_field_expressions(*u, "sources.u", "subdomain", true, out.source_u);
    if (const json* w = cfg::find(*sources, "w"))
      cfg::parse_field_expressions(*w, "sources.w", "edge", true, out.source_w);
    for (const auto& [id, expr] : out.source_u)
      if (!out.domain.find_subdomain(id))
        cfg::fail("sources.u", "unknown subdomain id " + std::to_string(id));
    for (const auto& [id, expr] : out.source_w)
      if (!out.domain.find_edge(id))
        cfg::fail("sources.w", "unknown edge id " + std::to_string(id));
  }

  if (const json* o = cfg::find(root, "outputs")) {
    cfg::check_object(*o, "outputs");
    cfg::check_keys(*o, "outputs",
                    {"directory", "diagnostics", "summary", "write_vtk", "vtk_every"});
    out.outputs.directory = cfg::string_or(*o, "directory", "outputs", out.outputs.directory);
    out.outputs.diagnostics_csv =
        cfg::string_or(*o, "diagnostics", "outputs", out.outputs.diagnostics_csv);
    out.outputs.summary_json = cfg::string_or(*o, "summary", "outputs", out.outputs.summary_json);
    out.outputs.write_vtk = cfg::bool_or(*o, "write_vtk", "outputs", out.outputs.write_vtk);
    out.outputs.vtk_every = cfg::int_or(*o, "vtk_every", "outputs", out.outputs.vtk_every);
    if (out.outputs.vtk_every < 1) cfg::fail("outputs.vtk_every", "must be at least 1");
  }

  if (const json* vl = cfg::find(root, "vertex_limit")) {
    cfg::check_object(*vl, "vertex_limit");
    cfg::check_keys(*vl, "vertex_limit",
                    {"L", "theta", "mu", "lambda", "edge_reaction", "h", "dt", "t_end", "u0",
                     "v0", "w0", "deltas", "newton_tol", "newton_max_iter"});
    VertexLimitSection& s = out.vertex_limit;
    s.present = true;
    s.L = cfg::number_or(*vl, "L", "vertex_limit", s.L);
    s.theta = cfg::number_or(*vl, "theta", "vertex_limit", s.theta);
    s.mu = cfg::number_or(*vl, "mu", "vertex_limit", s.mu);
    s.lambda = cfg::number_or(*vl, "lambda", "vertex_limit", s.lambda);
    if (const json* r = cfg::find(*vl, "edge_reaction"))
      s.edge_reaction = cfg::parse_reaction(*r, "vertex_limit.edge_reaction");
    s.h = cfg::number_or(*vl, "h", "vertex_limit", s.h);
    s.dt = cfg::number_or(*vl, "dt", "vertex_limit", s.dt);
    s.t_end = cfg::number_or(*vl, "t_end", "vertex_limit", s.t_end);
    if (const json* u0 = cfg::find(*vl, "u0"))
      s.u0 = cfg::parse_expression(*u0, "vertex_limit.u0", false);
    if (const json* v0 = cfg::find(*vl, "v0"))
      s.v0 = cfg::parse_expression(*v0, "vertex_limit.v0", false);
    s.w0 = cfg::number_or(*vl, "w0", "vertex_limit", s.w0);
    s.newton_tol = cfg::number_or(*vl, "newton_tol", "vertex_limit", s.newton_tol);
    s.newton_max_iter = cfg::int_or(*vl, "newton_max_iter", "vertex_limit", s.newton_max_iter);
    if (const json* deltas = cfg::find(*vl, "deltas")) {
      if (!deltas->is_array()) cfg::fail("vertex_limit.deltas", "expected an array");
      for (std::size_t i = 0; i < deltas->size(); ++i)
        s.deltas.push_back(cfg::to_number(
            (*deltas)[i], "vertex_limit.deltas[" + std::to_string(i) + "]"));
      for (double d : s.deltas)
        if (!(d > 0.0) || d >= 2.0 * s.L)
          cfg::fail("vertex_limit.deltas", "widths must satisfy 0 < delta < 2 L");
    }
  }

  return out;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& err) {
    throw ConfigError("config is not valid JSON: " + std::string(err.what()));
  }
  return parse_config(root);
}

// --- canonical serialization -----------------------------------------------------

inline json to_json(const RunConfig& c) {
  json root = json::object();

  json vertices = json::array();
  for (const auto& v : c.domain.vertices)
    vertices.push_back({{"id", v.id}, {"position", {v.position.x(), v.position.y()}}});
  json edges = json::array();
  for (const auto& e : c.domain.edges)
    edges.push_back({{"id", e.id},
                     {"source", e.source_vertex},
                     {"terminal", e.terminal_vertex},
                     {"length", e.length},
                     {"subdomains", e.adjacent_subdomains}});
  json subdomains = json::array();
  for (const auto& s : c.domain.subdomains) {
    json loop = json::array();
    for (const auto& leg : s.boundary_loop)
      loop.push_back({{"edge", leg.edge_id}, {"reversed", leg.reversed}});
    subdomains.push_back({{"id", s.id}, {"loop", loop}});
  }
  root["geometry"] = {{"vertices", vertices}, {"edges", edges}, {"subdomains", subdomains}};

  auto flux_json = [](const FluxLaw& f) {
    return json{{"p", f.p},
                {"variant",
                 f.variant == FluxVariant::pure_power ? "pure_power" : "linear_plus_power"},
                {"epsilon", f.epsilon}};
  };
  auto reaction_json = [](const ReactionLaw& r) {
    const char* kind = r.kind == ReactionKind::zero     ? "zero"
                       : r.kind == ReactionKind::linear ? "linear"
                                                        : "power";
    return json{{"kind", kind}, {"coefficient", r.coefficient}, {"exponent", r.exponent}};
  };
  json coefficients = json::object();
  {
    json alpha = json::array(), beta = json::array();
    for (const auto& [key, value] : c.model.coupling.alpha)
      alpha.push_back({{"subdomain", key.first}, {"edge", key.second}, {"value", value}});
    for (const auto& [key, value] : c.model.coupling.beta)
      beta.push_back({{"subdomain", key.first}, {"edge", key.second}, {"value", value}});
    json gamma = json::array();
    for (const auto& [key, value] : c.model.coupling.gamma)
      gamma.push_back({{"vertex", std::get<0>(key)},
                       {"from", std::get<1>(key)},
                       {"to", std::get<2>(key)},
                       {"value", value}});
    json delta = json::array(), lambda = json::array();
    for (const auto& [key, value] : c.model.coupling.delta)
      delta.push_back({{"vertex", key.first}, {"edge", key.second}, {"value", value}});
    for (const auto& [key, value] : c.model.coupling.lambda)
      lambda.push_back({{"vertex", key.first}, {"edge", key.second}, {"value", value}});
    if (!alpha.empty()) coefficients["alpha"] = alpha;
    if (!beta.empty()) coefficients["beta"] = beta;
    if (!gamma.empty()) coefficients["gamma"] = gamma;
    if (!delta.empty()) coefficients["delta"] = delta;
    if (!lambda.empty()) coefficients["lambda"] = lambda;
  }
  root["model"] = {{"subdomain_flux", flux_json(c.model.subdomain_flux)},
                   {"edge_flux", flux_json(c.model.edge_flux)},
                   {"subdomain_reaction", reaction_json(c.model.subdomain_reaction)},
                   {"edge_reaction", reaction_json(c.model.edge_reaction)},
                   {"coefficients", coefficients}};

  const char* scheme =
      c.solver.scheme == SolverConfig::Scheme::monolithic ? "monolithic" : "splitting";
  const char* generator = c.mesh_generator == MeshOptions::Generator::automatic ? "auto"
                          : c.mesh_generator == MeshOptions::Generator::structured
                              ? "structured"
                              : "delaunay";
  root["discretization"] = {{"h", c.h},
                            {"dt", c.solver.dt},
                            {"t_end", c.solver.t_end},
                            {"newton_tol", c.solver.newton_tol},
                            {"newton_max_iter", c.solver.newton_max_iter},
                            {"line_search", c.solver.line_search},
                            {"scheme", scheme},
                            {"fixed_point_tol", c.solver.fixed_point_tol},
                            {"fixed_point_max_iter", c.solver.fixed_point_max_iter},
                            {"mesh_generator", generator}};

  json initial = json::object();
  {
    json u = json::array(), w = json::array(), z = json::array();
    for (const auto& [id, expr] : c.initial_u)
      u.push_back({{"subdomain", id}, {"expression", expr.text()}});
    for (const auto& [id, expr] : c.initial_w)
      w.push_back({{"edge", id}, {"expression", expr.text()}});
    for (const auto& [id, value] : c.initial_z)
      z.push_back({{"vertex", id}, {"value", value}});
    if (!u.empty()) initial["u"] = u;
    if (!w.empty()) initial["w"] = w;
    if (!z.empty()) initial["z"] = z;
  }
  if (!initial.empty()) root["initial"] = initial;

  json sources = json::object();
  {
    json u = json::array(), w = json::array();
    for (const auto& [id, expr] : c.source_u)
      u.push_back({{"subdomain", id}, {"expression", expr.text()}});
    for (const auto& [id, expr] : c.source_w)
      w.push_back({{"edge", id}, {"expression", expr.text()}});
    if (!u.empty()) sources["u"] = u;
    if (!w.empty()) sources["w"] = w;
  }
  if (!sources.empty()) root["sources"] = sources;

  root["outputs"] = {{"directory", c.outputs.directory},
                     {"diagnostics", c.outputs.diagnostics_csv},
                     {"summary", c.outputs.summary_json},
                     {"write_vtk", c.outputs.write_vtk},
                     {"vtk_every", c.outputs.vtk_every}};

  if (c.vertex_limit.present) {
    const VertexLimitSection& s = c.vertex_limit;
    json vl = {{"L", s.L},          {"theta", s.theta},
               {"mu", s.mu},        {"lambda", s.lambda},
               {"edge_reaction", reaction_json(s.edge_reaction)},
               {"h", s.h},          {"dt", s.dt},
               {"t_end", s.t_end},  {"w0", s.w0},
               {"deltas", s.deltas}, {"newton_tol", s.newton_tol},
               {"newton_max_iter", s.newton_max_iter}};
    if (!s.u0.empty()) vl["u0"] = s.u0.text();
    if (!s.v0.empty()) vl["v0"] = s.v0.text();
    root["vertex_limit"] = vl;
  }

  return root;
}

// FNV-1a fingerprint of the canonical serialization.  The outputs block is
// excluded so that redirecting files (e.g. via --out) does not change the
// identity of the simulation being run.
inline std::string config_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("outputs");
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// Apply a dotted-path override like "discretization.dt=1e-3" to a JSON
// document before parsing.  Values parse as JSON when possible and fall back
// to strings.  Numeric path components index into arrays.
inline void apply_override(json& root, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like path.to.field=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::parse_error&) {
    value = value_text;  // plain string
  }

  json* at = &root;
  std::size_t begin = 0;
  while (begin <= path.size()) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw ConfigError("override path has an empty component: " + path);
    const bool last = dot == std::string::npos;
    const bool is_index = !key.empty() && key.find_first_not_of("0123456789") == std::string::npos;
    if (is_index && at->is_array()) {
      const std::size_t idx = std::stoul(key);
      if (idx >= at->size()) throw ConfigError("override index out of range: " + path);
      at = &(*at)[idx];
    } else {
      if (at->is_null()) *at = json::object();  // create missing sections on the way down
      if (!at->is_object()) throw ConfigError("override path does not lead to an object: " + path);
      at = &(*at)[key];
    }
    if (last) {
      *at = value;
      return;
    }
    begin = dot + 1;
  }
}

}  // namespace netdiff
