#pragma once

#include <vector>

#include "ischem/adjoint.hpp"
#include "ischem/monodomain.hpp"

namespace ischem {

/// Boundary mismatch functional: half the space-time L2 norm of the residual
/// on the selected regions, trapezoidal in time.
double mismatch_J(const TraceSeries& simulated, const TraceSeries& measured, const Mesh& mesh,
                  RegionSet regions, double dt);

/// Nodal topological gradient with its admissibility mask (nodes at distance
/// >= d0 from the boundary).
struct GradientField {
  NodalField values;
  std::vector<char> mask;
  double mask_d0 = 0.0;
};

/// G(z) = sum_n dt w_n [ M(z)(K0-K1)(z) grad u . grad Phi + f(u,w) Phi ](z, t_n):
/// element P1 gradients averaged to nodes (area weights), per-node
/// polarization tensor from the local eigenframe, trapezoidal time rule.
/// The forward trajectory must be the unperturbed one.
GradientField assemble_gradient_field(const Mesh& mesh, const StateTrajectory& forward,
                                      const AdjointTrajectory& adjoint, const TensorField& K0,
                                      const TensorField& K1, const IonicParams& params, double dt,
                                      double mask_d0 = 0.3);

struct LocalMinimum {
  int node = -1;
  Vec2 position{0.0, 0.0};
  double value = 0.0;
};

/// Global masked minimizer plus up to count-1 further local minima, pairwise
/// at least min_separation apart (greedy suppression, ties broken by lowest
/// node index).
struct LocalizationResult {
  LocalMinimum global;
  std::vector<LocalMinimum> minima;  // ranked, global first
};

LocalizationResult locate_minima(const GradientField& gradient, const Mesh& mesh, int count,
                                 double min_separation);

}  // namespace ischem
