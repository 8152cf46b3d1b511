#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "ischem/mesh.hpp"
#include "ischem/monodomain.hpp"

namespace ischem {

/// Full experiment description: geometry, the two discretization levels
/// (synthetic data on the fine one, reconstruction on the coarse one),
/// model parameters, measurement setup, noise and outputs.
struct ExperimentConfig {
  VentricleGeometry geometry;

  double h_coarse = 0.1;    // cm
  double h_fine = 0.05;
  double dt_coarse = 0.05;  // dimensionless time
  double dt_fine = 0.0125;
  double horizon = 30.0;    // T

  IonicParams ionic;

  double healthy_parallel = 1.200;
  double healthy_transverse = 0.2538;
  double ischemic_parallel = 0.2308;
  double ischemic_transverse = 0.0062;

  StimulusSpec stimulus;
  std::vector<Inclusion> inclusions;

  RegionSet measurement{BoundaryRegion::EPI};

  double noise_level = 0.0;  // rho in [0,1]
  std::uint64_t seed = 1;

  double mask_d0 = 0.3;      // cm, boundary separation of admissible centers
  int minima_count = 1;
  double min_separation = 1.0;  // cm, between reported minima

  std::string output_dir = "out";

  /// Throws ConfigError when an invariant is violated (fine level not
  /// strictly finer, noise level outside [0,1], bad parameters).
  void check() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& name);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical key = value rendering (sorted, full precision); two configs are
/// interchangeable iff their canonical texts match.
std::string canonical_config_text(const ExperimentConfig& config);

/// FNV-1a hash of the canonical text, as 16 hex digits. Stamped into every
/// output file's provenance so artifacts from different configs cannot mix.
std::string config_hash(const ExperimentConfig& config);

}  // namespace ischem
