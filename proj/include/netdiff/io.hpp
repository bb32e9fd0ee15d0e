#pragma once

// Output writers: diagnostics CSV (17 significant digits), legacy ASCII VTK
// snapshots (one unstructured grid per subdomain carrying u, one polyline per
// edge carrying w), and the run summary JSON.  All writers produce the full
// text in memory and commit it with write_text_file(), which drops a
// `<path>.INCOMPLETE` marker next to the target if the write fails so a
// truncated file is never mistaken for a finished one.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netdiff/analysis.hpp"
#include "netdiff/assembly.hpp"
#include "netdiff/mesh.hpp"

namespace netdiff {

struct IoFailure : std::runtime_error {
  explicit IoFailure(const std::string& what) : std::runtime_error(what) {}
};

// %.17g: shortest text that round-trips an IEEE double.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (out) {
    out << content;
    out.flush();
  }
  if (!out) {
    std::ofstream marker(path + ".INCOMPLETE");
    marker << "write failed; contents of " << path << " are not trustworthy\n";
    throw IoFailure("failed to write " + path);
  }
}

// --- diagnostics CSV --------------------------------------------------------------

inline std::string diagnostics_header(const std::vector<int>& vertex_ids) {
  std::string line = "time,total_mass,X,sup_u,sup_w,energy";
  for (int id : vertex_ids) line += ",z_" + std::to_string(id);
  line += "\n";
  return line;
}

inline std::string diagnostics_row(const ReportRow& row) {
  std::string line = format_full(row.time);
  line += "," + format_full(row.total_mass);
  line += "," + format_full(row.X);
  line += "," + format_full(row.sup_u);
  line += "," + format_full(row.sup_w);
  line += "," + format_full(row.energy);
  for (double z : row.z) line += "," + format_full(z);
  line += "\n";
  return line;
}

inline std::string diagnostics_csv_text(const std::vector<ReportRow>& rows,
                                        const std::vector<int>& vertex_ids) {
  std::string text = diagnostics_header(vertex_ids);
  for (const auto& row : rows) text += diagnostics_row(row);
  return text;
}

// Minimal reader for mass-report style audits of an existing run.
struct DiagnosticsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw IoFailure("diagnostics file has no column named " + name);
  }
};

inline DiagnosticsTable read_diagnostics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open diagnostics file: " + path);
  DiagnosticsTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoFailure("diagnostics file is empty: " + path);
  std::size_t begin = 0;
  while (begin <= line.size()) {
    const std::size_t comma = line.find(',', begin);
    table.columns.push_back(line.substr(begin, comma == std::string::npos ? comma : comma - begin));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
      row.push_back(std::stod(cell));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (row.size() != table.columns.size())
      throw IoFailure("diagnostics row has " + std::to_string(row.size()) + " cells, expected " +
                      std::to_string(table.columns.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

// --- legacy ASCII VTK -------------------------------------------------------------

inline std::string vtk_unstructured_text(const SubdomainMesh& mesh, const Eigen::VectorXd& u,
                                         const std::string& field = "u") {
  if (u.size() != static_cast<Eigen::Index>(mesh.nodes.size()))
    throw std::invalid_argument("point data size does not match mesh");
  std::string text;
  text += "# vtk DataFile Version 3.0\n";
  text += "subdomain " + std::to_string(mesh.subdomain_id) + "\n";
  text += "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  text += "POINTS " + std::to_string(mesh.nodes.size()) + " double\n";
  for (const Vec2& p : mesh.nodes)
    text += format_full(p.x()) + " " + format_full(p.y()) + " 0\n";
  const std::size_t m = mesh.triangles.size();
  text += "CELLS " + std::to_string(m) + " " + std::to_string(4 * m) + "\n";
  for (const auto& t : mesh.triangles)
    text += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " +
            std::to_string(t[2]) + "\n";
  text += "CELL_TYPES " + std::to_string(m) + "\n";
  for (std::size_t i = 0; i < m; ++i) text += "5\n";
  text += "POINT_DATA " + std::to_string(mesh.nodes.size()) + "\n";
  text += "SCALARS " + field + " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < u.size(); ++i) text += format_full(u[i]) + "\n";
  return text;
}

inline std::string vtk_polyline_text(const PartitionedDomain& domain, const Edge& edge,
                                     const EdgeMesh& mesh, const Eigen::VectorXd& w,
                                     const std::string& field = "w") {
  if (w.size() != static_cast<Eigen::Index>(mesh.nodes.size()))
    throw std::invalid_argument("point data size does not match edge mesh");
  std::string text;
  text += "# vtk DataFile Version 3.0\n";
  text += "edge " + std::to_string(edge.id) + "\n";
  text += "ASCII\nDATASET POLYDATA\n";
  text += "POINTS " + std::to_string(mesh.nodes.size()) + " double\n";
  for (double s : mesh.nodes) {
    const Vec2 p = detail::edge_node_position(domain, edge, s);
    text += format_full(p.x()) + " " + format_full(p.y()) + " 0\n";
  }
  const std::size_t n = mesh.nodes.size();
  text += "LINES 1 " + std::to_string(n + 1) + "\n";
  text += std::to_string(n);
  for (std::size_t i = 0; i < n; ++i) text += " " + std::to_string(i);
  text += "\n";
  text += "POINT_DATA " + std::to_string(n) + "\n";
  text += "SCALARS " + field + " double 1\nLOOKUP_TABLE default\n";
  for (Eigen::Index i = 0; i < w.size(); ++i) text += format_full(w[i]) + "\n";
  return text;
}

inline void write_vtk_snapshot(const std::string& directory, int snapshot_index,
                               const AssemblyContext& ctx, const DiscreteState& x) {
  const MeshSet& meshes = *ctx.meshes;
  const BlockLayout& layout = ctx.layout;
  char tag[16];
  std::snprintf(tag, sizeof(tag), "%06d", snapshot_index);
  for (std::size_t i = 0; i < layout.subdomain_ids.size(); ++i) {
    const SubdomainMesh& mesh = meshes.subdomain_mesh(layout.subdomain_ids[i]);
    const std::string path = directory + "/subdomain_" +
                             std::to_string(layout.subdomain_ids[i]) + "_" + tag + ".vtk";
    write_text_file(path, vtk_unstructured_text(mesh, x.u[i]));
  }
  for (std::size_t j = 0; j < layout.edge_ids.size(); ++j) {
    const Edge& edge = ctx.domain->edge(layout.edge_ids[j]);
    const EdgeMesh& mesh = meshes.edge_mesh(layout.edge_ids[j]);
    const std::string path =
        directory + "/edge_" + std::to_string(layout.edge_ids[j]) + "_" + tag + ".vtk";
    write_text_file(path, vtk_polyline_text(*ctx.domain, edge, mesh, x.w[j]));
  }
}

// --- summary ----------------------------------------------------------------------

inline nlohmann::json summary_json(const std::string& config_hash, const ReportRow& final_row,
                                   const std::vector<int>& vertex_ids, int steps,
                                   long total_newton, int max_newton, long total_fixed_point,
                                   const std::vector<std::string>& mesh_notes) {
  nlohmann::json z = nlohmann::json::object();
  for (std::size_t i = 0; i < vertex_ids.size() && i < final_row.z.size(); ++i)
    z["z_" + std::to_string(vertex_ids[i])] = final_row.z[i];
  return nlohmann::json{
      {"config_hash", config_hash},
      {"final",
       {{"time", final_row.time},
        {"total_mass", final_row.total_mass},
        {"X", final_row.X},
        {"sup_u", final_row.sup_u},
        {"sup_w", final_row.sup_w},
        {"energy", final_row.energy},
        {"z", z},
        {"extinct", final_row.extinct}}},
      {"solver",
       {{"steps", steps},
        {"total_newton_iterations", total_newton},
        {"max_newton_iterations", max_newton},
        {"total_fixed_point_iterations", total_fixed_point}}},
      {"mesh_notes", mesh_notes}};
}

inline void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoFailure("cannot create output directory " + path + ": " + ec.message());
}

}  // namespace netdiff
