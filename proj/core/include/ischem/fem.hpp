#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "ischem/fibers.hpp"
#include "ischem/mesh.hpp"

namespace ischem {

/// Assembled sparse operator (compressed storage) with a symmetry flag.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(Eigen::SparseMatrix<double> m, bool symmetric);

  int rows() const { return int(m_.rows()); }
  int cols() const { return int(m_.cols()); }
  bool symmetric() const { return symmetric_; }
  const Eigen::SparseMatrix<double>& eigen() const { return m_; }

  /// max |A - A^T| entrywise; 0 for structurally symmetric assemblies.
  double max_asymmetry() const;

  NodalField operator*(const NodalField& x) const { return m_ * x; }

 private:
  Eigen::SparseMatrix<double> m_;
  bool symmetric_ = false;
};

/// P1 mass matrix; row-sum lumped diagonal when `lumped` is set.
SparseMatrix assemble_mass(const Mesh& mesh, bool lumped);

/// P1 stiffness matrix for the anisotropic diffusion term with per-element
/// tensor K. Positive semidefinite; constants span the kernel.
SparseMatrix assemble_stiffness(const Mesh& mesh, const TensorField& K);

/// 1D P1 mass matrix on the boundary edges of the selected regions, embedded
/// in the full node numbering.
SparseMatrix assemble_boundary_mass(const Mesh& mesh, RegionSet regions);

struct SolveOptions {
  double tol = 1e-10;
  int max_iterations = 20000;
  /// Non-empty activates the singular (pure-Neumann) mode: preconditioned CG
  /// followed by mean subtraction over these nodes.
  std::vector<int> zero_mean_nodes;
};

/// Sparse solve with a relative-residual contract: ||Ax-b||/||b|| <= tol.
/// Direct factorization by default; throws SolverError on failure, carrying
/// the final residual.
NodalField solve_linear(const SparseMatrix& A, const NodalField& b, const SolveOptions& options = {});

}  // namespace ischem
