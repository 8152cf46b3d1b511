#include "ischem/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ischem {

namespace fs = std::filesystem;

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void atomic_write_text(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

void write_trace_csv(const TraceSeries& trace, const fs::path& path) {
  std::ostringstream out;
  out << "t,node_id,x,y,u\n";
  for (size_t t = 0; t < trace.times.size(); ++t) {
    for (size_t j = 0; j < trace.node_ids.size(); ++j) {
      out << format_full(trace.times[t]) << ',' << trace.node_ids[j] << ','
          << format_full(trace.coords[j].x()) << ',' << format_full(trace.coords[j].y()) << ','
          << format_full(trace.values(int(t), int(j))) << "\n";
    }
  }
  atomic_write_text(path, out.str());
}

TraceSeries read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file '" + path.string() + "'");
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line.rfind("t,node_id,x,y,u", 0) != 0) {
    throw ParseError(path.string() + ":1: expected header 't,node_id,x,y,u'");
  }
  ++line_no;

  TraceSeries trace;
  std::vector<double> values;
  double current_time = 0.0;
  bool first_block = true;
  size_t col = 0;
  bool have_time = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    double t, x, y, u;
    long id;
    if (std::sscanf(line.c_str(), "%lg,%ld,%lg,%lg,%lg", &t, &id, &x, &y, &u) != 5) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    if (!have_time || t != current_time) {
      if (have_time && col != trace.node_ids.size()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": incomplete time block");
      }
      if (have_time) first_block = false;
      trace.times.push_back(t);
      current_time = t;
      have_time = true;
      col = 0;
    }
    if (first_block) {
      trace.node_ids.push_back(int(id));
      trace.coords.emplace_back(x, y);
    } else {
      if (col >= trace.node_ids.size() || trace.node_ids[col] != int(id)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": node order changed between blocks");
      }
    }
    values.push_back(u);
    ++col;
  }
  if (trace.times.empty() || trace.node_ids.empty()) {
    throw ParseError(path.string() + ": empty trace");
  }
  if (values.size() != trace.times.size() * trace.node_ids.size()) {
    throw ParseError(path.string() + ": truncated trace");
  }
  trace.values.resize(int(trace.times.size()), int(trace.node_ids.size()));
  for (size_t t = 0; t < trace.times.size(); ++t) {
    for (size_t j = 0; j < trace.node_ids.size(); ++j) {
      trace.values(int(t), int(j)) = values[t * trace.node_ids.size() + j];
    }
  }
  return trace;
}

void write_trajectory(const StateTrajectory& trajectory, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    const auto& meta = trajectory.metadata();
    out << "trajectory-bin v1\n";
    out << "nodes " << trajectory.u(0).size() << "\n";
    out << "steps " << trajectory.steps() << "\n";
    out << "dt " << format_full(trajectory.dt()) << "\n";
    out << "ionic " << format_full(meta.params.excitation) << " " << format_full(meta.params.threshold)
        << " " << format_full(meta.params.recovery_rate) << "\n";
    for (int m = 0; m <= trajectory.steps(); ++m) {
      out.write(reinterpret_cast<const char*>(trajectory.u(m).data()),
                std::streamsize(sizeof(double)) * trajectory.u(m).size());
      out.write(reinterpret_cast<const char*>(trajectory.w(m).data()),
                std::streamsize(sizeof(double)) * trajectory.w(m).size());
    }
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

StateTrajectory read_trajectory(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trajectory file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "trajectory-bin v1") {
    throw ParseError(path.string() + ": expected header 'trajectory-bin v1'");
  }
  long nodes = -1, steps = -1;
  double dt = 0.0;
  IonicParams params;
  for (int k = 0; k < 4; ++k) {
    if (!std::getline(in, line)) throw ParseError(path.string() + ": truncated header");
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    bool ok = true;
    if (key == "nodes") ok = bool(ss >> nodes);
    else if (key == "steps") ok = bool(ss >> steps);
    else if (key == "dt") ok = bool(ss >> dt);
    else if (key == "ionic") ok = bool(ss >> params.excitation >> params.threshold >> params.recovery_rate);
    else ok = false;
    if (!ok) throw ParseError(path.string() + ": malformed header line '" + line + "'");
  }
  if (nodes <= 0 || steps < 0 || !(dt > 0)) throw ParseError(path.string() + ": invalid header");
  std::vector<NodalField> u(size_t(steps) + 1), w(size_t(steps) + 1);
  for (long m = 0; m <= steps; ++m) {
    u[size_t(m)].resize(nodes);
    w[size_t(m)].resize(nodes);
    in.read(reinterpret_cast<char*>(u[size_t(m)].data()), std::streamsize(sizeof(double)) * nodes);
    in.read(reinterpret_cast<char*>(w[size_t(m)].data()), std::streamsize(sizeof(double)) * nodes);
    if (!in) throw ParseError(path.string() + ": truncated payload");
  }
  TrajectoryMetadata meta;
  meta.params = params;
  meta.dt = dt;
  return StateTrajectory(std::move(u), std::move(w), dt, std::move(meta));
}

void write_vtk_fields(const Mesh& mesh,
                      const std::vector<std::pair<std::string, const NodalField*>>& fields,
                      const fs::path& path) {
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n";
  out << "ischem fields\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.node_count() << " double\n";
  for (const auto& p : mesh.nodes()) {
    out << format_full(p.x()) << " " << format_full(p.y()) << " 0\n";
  }
  out << "CELLS " << mesh.triangle_count() << " " << 4 * mesh.triangle_count() << "\n";
  for (const auto& t : mesh.triangles()) {
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
  out << "CELL_TYPES " << mesh.triangle_count() << "\n";
  for (int e = 0; e < mesh.triangle_count(); ++e) out << "5\n";
  if (!fields.empty()) {
    out << "POINT_DATA " << mesh.node_count() << "\n";
    for (const auto& [name, field] : fields) {
      if (field->size() != mesh.node_count()) throw ParamError("VTK field size mismatch: " + name);
      out << "SCALARS " << name << " double 1\n";
      out << "LOOKUP_TABLE default\n";
      for (int i = 0; i < field->size(); ++i) out << format_full((*field)[i]) << "\n";
    }
  }
  atomic_write_text(path, out.str());
}

void write_provenance(const fs::path& data_path, const Provenance& p) {
  std::ostringstream out;
  out << "provenance v1\n";
  out << "config_hash " << p.config_hash << "\n";
  out << "seed " << p.seed << "\n";
  out << "noise_level " << format_full(p.noise_level) << "\n";
  out << "kind " << p.kind << "\n";
  atomic_write_text(data_path.string() + ".provenance", out.str());
}

Provenance read_provenance(const fs::path& data_path) {
  const fs::path path = data_path.string() + ".provenance";
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("missing provenance sidecar '" + path.string() +
                      "'; refusing to use unattributed data");
  }
  std::string line;
  if (!std::getline(in, line) || line != "provenance v1") {
    throw ParseError(path.string() + ": expected header 'provenance v1'");
  }
  Provenance p;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "config_hash") ss >> p.config_hash;
    else if (key == "seed") ss >> p.seed;
    else if (key == "noise_level") ss >> p.noise_level;
    else if (key == "kind") ss >> p.kind;
  }
  return p;
}

}  // namespace ischem
