#pragma once

#include <Eigen/Dense>

#include "ischem/mesh.hpp"

namespace ischem {

/// 2x2 symmetric polarization tensor of a disk inclusion; equals the
/// identity at zero contrast and multiplies (K0 - K1) in the topological
/// gradient integrand.
using PolarizationTensor = Eigen::Matrix2d;

/// Closed form for a disk in an anisotropic background: rotate to the shared
/// eigenframe, rescale so the background is the identity (the disk becomes
/// an ellipse with semiaxes 1/sqrt(kappa_i)), apply the uniform-interior-field
/// ellipse formula, and pull back. Scale-invariant, so no radius argument.
PolarizationTensor polarization_disk(const Eigen::Matrix2d& K0_at_z, const Eigen::Matrix2d& K1_at_z);

/// Brute-force FEM oracle: solves the two transmission problems for a disk of
/// the given radius embedded in a large box (side box_size, Dirichlet data
/// x_j on its boundary) and returns the mean interior gradient. h_oracle is
/// the interface mesh size; the disk diameter must span >= 16 elements and
/// box_size must be >= 20 * radius.
PolarizationTensor transmission_oracle(const Eigen::Matrix2d& K0_at_z, const Eigen::Matrix2d& K1_at_z,
                                       double radius, double box_size, double h_oracle);

}  // namespace ischem
