#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ischem/monodomain.hpp"

namespace ischem {

/// All writers are atomic: the content goes to a temporary file in the same
/// directory, then renamed over the target.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

/// TraceSeries CSV, header `t,node_id,x,y,u`, one row per (time, node),
/// full decimal precision.
void write_trace_csv(const TraceSeries& trace, const std::filesystem::path& path);
TraceSeries read_trace_csv(const std::filesystem::path& path);

/// Trajectory checkpoint: text header (`trajectory-bin v1`, counts, dt,
/// ionic parameters) followed by the raw nodal fields.
void write_trajectory(const StateTrajectory& trajectory, const std::filesystem::path& path);
StateTrajectory read_trajectory(const std::filesystem::path& path);

/// Legacy-ASCII VTK unstructured grid with named nodal scalar fields.
void write_vtk_fields(const Mesh& mesh,
                      const std::vector<std::pair<std::string, const NodalField*>>& fields,
                      const std::filesystem::path& path);

/// Provenance sidecar written next to every data artifact (`<file>.provenance`).
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  double noise_level = 0.0;
  std::string kind;
};
void write_provenance(const std::filesystem::path& data_path, const Provenance& p);
Provenance read_provenance(const std::filesystem::path& data_path);

std::string format_full(double v);  // %.17g

}  // namespace ischem
