#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ischem/adjoint.hpp"
#include "ischem/config.hpp"
#include "ischem/io.hpp"
#include "ischem/topo_gradient.hpp"

namespace ischem {

/// Mesh with its fiber-built conductivity pair at one resolution.
struct ModelContext {
  Mesh mesh;
  TensorField healthy;   // K0
  TensorField ischemic;  // K1
};

ModelContext build_model(const ExperimentConfig& config, double h,
                         const std::vector<RefinementDisk>& refinement = {});

/// Refinement patches resolving the given inclusions on the fine mesh.
std::vector<RefinementDisk> inclusion_refinement(const std::vector<Inclusion>& inclusions,
                                                 double h_fine);

/// Restriction of a fine boundary trace onto the coarse measurement grid:
/// linear interpolation in time, nearest trace node in space.
TraceSeries resample_trace(const TraceSeries& fine, const Mesh& coarse_mesh, RegionSet regions,
                           const std::vector<double>& coarse_times);

/// u + rho * eta with eta i.i.d. standard normal per (node, time), from a
/// deterministic seeded generator.
TraceSeries add_noise(const TraceSeries& trace, double rho, std::uint64_t seed);

std::vector<double> uniform_times(double dt, double T);

struct SynthOptions {
  bool save_fine_trace = false;
};

struct SynthResult {
  std::filesystem::path measurement;
  std::filesystem::path fine_trace;  // empty unless requested
  TraceSeries trace;                 // the written measurement
};

/// Perturbed solve on the fine discretization, noise, restriction to the
/// coarse grid, and the measurement CSV + provenance sidecar.
SynthResult generate_synthetic(const ExperimentConfig& config,
                               const std::filesystem::path& out_dir, const SynthOptions& = {});

/// Null-experiment levels: the mismatch and gradient magnitude produced by
/// discretization differences alone (no inclusion anywhere).
struct CrimeFloor {
  double J = 0.0;
  double gradient_sup = 0.0;  // max |G| over the admissible mask
};
CrimeFloor compute_crime_floor(const ExperimentConfig& config);

struct ReportedMinimum {
  LocalMinimum minimum;
  bool low_confidence = false;  // depth below 10x the null-experiment floor
};

struct ReconstructionReport {
  double J = 0.0;
  CrimeFloor floor;
  std::vector<ReportedMinimum> minima;  // ranked, global minimizer first
  GradientField gradient;
  std::filesystem::path gradient_csv, gradient_vtk, report_path, manifest_path;
};

/// The one-step localization pipeline on the coarse discretization:
/// unperturbed solve, adjoint from the boundary residual, topological
/// gradient, masked minima. Refuses measurements from a different config.
ReconstructionReport run_reconstruction(const ExperimentConfig& config,
                                        const std::filesystem::path& measurement_csv,
                                        const std::filesystem::path& out_dir,
                                        const CrimeFloor* precomputed_floor = nullptr);

struct RateRow {
  double radius = 0.0;
  double area = 0.0;  // |omega_h|
  double linf_l2 = 0.0, l2_h1 = 0.0, l2_qt = 0.0;
  double J_perturbed = 0.0, J_unperturbed = 0.0;
  double gradient_at_center = 0.0;
  double expansion_ratio = 0.0;  // (J(omega)-J(0)) / (|omega_h| G(z))
};

struct RateReport {
  std::vector<RateRow> rows;
  double slope_l2_qt = 0.0, slope_linf_l2 = 0.0, slope_l2_h1 = 0.0;
  std::filesystem::path csv, summary;
};

/// Perturbed-vs-unperturbed solves on one shared fine discretization for a
/// shrinking family of radii at the first configured inclusion's center;
/// fits the log-log energy rates and the first-order expansion ratio.
RateReport rate_study(const ExperimentConfig& config, std::vector<double> radii,
                      const std::filesystem::path& out_dir, int threads = 1);

}  // namespace ischem
