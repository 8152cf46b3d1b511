#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "ischem/mesh.hpp"

namespace ischem {

using NodalField = Eigen::VectorXd;

/// Per-element orthonormal frame: fiber direction e_f and transmural
/// direction e_n, with e_n = e_f rotated by -90 degrees.
class FiberField {
 public:
  FiberField(std::vector<Vec2> fiber, std::vector<Vec2> transmural);

  int size() const { return static_cast<int>(fiber_.size()); }
  const Vec2& fiber(int e) const { return fiber_[size_t(e)]; }
  const Vec2& transmural(int e) const { return transmural_[size_t(e)]; }

 private:
  std::vector<Vec2> fiber_;
  std::vector<Vec2> transmural_;
};

/// Per-element 2x2 symmetric positive definite tensors.
class TensorField {
 public:
  TensorField() = default;
  explicit TensorField(std::vector<Eigen::Matrix2d> tensors);
  static TensorField constant(int elements, const Eigen::Matrix2d& value);

  int size() const { return static_cast<int>(k_.size()); }
  const Eigen::Matrix2d& at(int e) const { return k_[size_t(e)]; }

  /// Smallest eigenvalue over all elements (k_min when applied to K1).
  double min_eigenvalue() const;
  /// Largest eigenvalue over all elements (k_max when applied to K0).
  double max_eigenvalue() const;

 private:
  std::vector<Eigen::Matrix2d> k_;
};

/// Eigen-decomposition of a symmetric 2x2 matrix, eigenvalues descending.
struct SymmetricEigen2 {
  double value1 = 0.0;  // largest
  double value2 = 0.0;
  Vec2 vector1{1.0, 0.0};
  Vec2 vector2{0.0, 1.0};
};
SymmetricEigen2 symmetric_eigen(const Eigen::Matrix2d& m);

struct FiberLaplaceResult {
  NodalField phi;
  int clamped_nodes = 0;     // nodes clipped back into [min,max] Dirichlet range
  double max_violation = 0;  // largest excursion before clamping
};

/// Transmural potential: Laplace solve with the given Dirichlet data per
/// boundary region. Regions absent from the mesh are ignored; at least one
/// tagged region must receive a value.
FiberLaplaceResult solve_fiber_laplace(const Mesh& mesh,
                                       const std::map<BoundaryRegion, double>& dirichlet);
/// Default transmural coordinate: 0 on both endocardia, 1 on the epicardium.
FiberLaplaceResult solve_fiber_laplace(const Mesh& mesh);

/// e_n = grad(phi)/|grad(phi)| per element, e_f = e_n rotated by +90 degrees.
FiberField fibers_from_potential(const Mesh& mesh, const NodalField& phi);

/// K = k_parallel e_f (x) e_f + k_transverse e_n (x) e_n per element.
TensorField build_conductivity(const FiberField& fibers, double k_parallel, double k_transverse);

/// Per-element harmonic mean of two commuting SPD tensor fields:
/// eigenvalues lambda_e*lambda_i/(lambda_e+lambda_i) on the shared frame.
TensorField harmonic_mean_tensor(const TensorField& extracellular, const TensorField& intracellular);

}  // namespace ischem
