#include "ischem/adjoint.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace ischem {

AdjointTrajectory::AdjointTrajectory(std::vector<NodalField> phi, std::vector<NodalField> psi, double dt)
    : phi_(std::move(phi)), psi_(std::move(psi)), dt_(dt) {
  if (phi_.size() != psi_.size() || phi_.empty()) throw ParamError("inconsistent adjoint arrays");
}

TraceSeries residual_trace(const TraceSeries& measured, const TraceSeries& simulated) {
  if (measured.node_ids != simulated.node_ids) {
    throw ParamError("residual: traces live on different node sets");
  }
  if (measured.times.size() != simulated.times.size()) {
    throw ParamError("residual: traces live on different time grids");
  }
  for (size_t t = 0; t < measured.times.size(); ++t) {
    if (std::abs(measured.times[t] - simulated.times[t]) > 1e-12 * std::max(1.0, measured.times.back())) {
      throw ParamError("residual: traces live on different time grids");
    }
  }
  TraceSeries out = simulated;
  out.values -= measured.values;
  return out;
}

AdjointTrajectory solve_adjoint(const Mesh& mesh, const TensorField& healthy,
                                const StateTrajectory& forward, const TraceSeries& residual,
                                RegionSet regions, double dt) {
  const int n = mesh.node_count();
  if (forward.u(0).size() != n) throw ParamError("forward trajectory does not match the mesh");
  if (std::abs(forward.dt() - dt) > 1e-12 * std::max(1.0, dt)) {
    throw ParamError("adjoint dt does not match the forward grid");
  }
  const int steps = forward.steps();
  if (int(residual.times.size()) != steps + 1) {
    throw ParamError("residual trace does not match the forward time grid");
  }
  const std::vector<int> region_ids = mesh.region_nodes(regions);
  if (residual.node_ids != region_ids) {
    throw ParamError("residual trace nodes do not match the selected regions");
  }

  const SparseMatrix stiffness = assemble_stiffness(mesh, healthy);
  const SparseMatrix boundary_mass = assemble_boundary_mass(mesh, regions);
  const NodalField lumped = assemble_mass(mesh, true).eigen().diagonal();
  const IonicParams params = forward.metadata().params;
  const double eps = params.recovery_rate;
  const double wdenom = 1.0 + dt * eps;

  Eigen::SparseMatrix<double> J = stiffness.eigen();
  std::vector<double*> diag_ptr(size_t(n), nullptr);
  for (int col = 0; col < J.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(J, col); it; ++it) {
      if (it.row() == it.col()) diag_ptr[size_t(it.col())] = &it.valueRef();
    }
  }
  const NodalField stiff_diag = stiffness.eigen().diagonal();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.analyzePattern(J);

  std::vector<NodalField> phi(size_t(steps) + 1, NodalField::Zero(n));
  std::vector<NodalField> psi(size_t(steps) + 1, NodalField::Zero(n));

  NodalField boundary_term = NodalField::Zero(n);
  NodalField rhs(n), fu(n), fw(n), gu(n);
  for (int m = steps - 1; m >= 0; --m) {
    // Implicit Euler in reversed time: everything is evaluated at level m.
    const NodalField& u = forward.u(m);
    const NodalField& w = forward.w(m);
    for (int i = 0; i < n; ++i) {
      const auto r = reaction_eval(u[i], w[i], params);
      fu[i] = r.df_du;
      fw[i] = r.df_dw;
      gu[i] = r.dg_du;
    }
    boundary_term.setZero();
    for (size_t j = 0; j < region_ids.size(); ++j) {
      boundary_term[region_ids[j]] = residual.values(m, int(j));
    }
    rhs = boundary_mass.eigen() * boundary_term;
    rhs += lumped.cwiseProduct(phi[size_t(m + 1)]) / dt;
    rhs -= lumped.cwiseProduct(gu.cwiseProduct(psi[size_t(m + 1)])) / wdenom;
    for (int i = 0; i < n; ++i) {
      *diag_ptr[size_t(i)] = stiff_diag[i] + lumped[i] / dt +
                             lumped[i] * (fu[i] - dt * gu[i] * fw[i] / wdenom);
    }
    ldlt.factorize(J);
    if (ldlt.info() != Eigen::Success) {
      throw SolverError("adjoint factorization failed at step " + std::to_string(m));
    }
    phi[size_t(m)] = ldlt.solve(rhs);
    psi[size_t(m)] = (psi[size_t(m + 1)] - dt * fw.cwiseProduct(phi[size_t(m)])) / wdenom;
  }
  return AdjointTrajectory(std::move(phi), std::move(psi), dt);
}

}  // namespace ischem
