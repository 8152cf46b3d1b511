#pragma once

#include <vector>

#include "ischem/monodomain.hpp"

namespace ischem {

/// Backward-in-time adjoint states (Phi, Psi) on the forward grid, with
/// Phi(T) = Psi(T) = 0 exactly.
class AdjointTrajectory {
 public:
  AdjointTrajectory(std::vector<NodalField> phi, std::vector<NodalField> psi, double dt);

  int steps() const { return static_cast<int>(phi_.size()) - 1; }
  double dt() const { return dt_; }
  double time(int n) const { return n * dt_; }
  const NodalField& phi(int n) const { return phi_[size_t(n)]; }
  const NodalField& psi(int n) const { return psi_[size_t(n)]; }

 private:
  std::vector<NodalField> phi_, psi_;
  double dt_;
};

/// Pointwise residual between a simulated trace and measured data,
/// r = u_sim - u_meas, on identical node sets and time grids.
TraceSeries residual_trace(const TraceSeries& measured, const TraceSeries& simulated);

/// Linear adjoint solve, implicit Euler marching backward from t = T. The
/// residual enters through the weak boundary term on the selected regions;
/// reaction coefficients are frozen at the stored forward states. Psi is
/// updated by its spatially uncoupled linear equation, eliminated per node.
AdjointTrajectory solve_adjoint(const Mesh& mesh, const TensorField& healthy_conductivity,
                                const StateTrajectory& forward, const TraceSeries& residual,
                                RegionSet regions, double dt);

}  // namespace ischem
