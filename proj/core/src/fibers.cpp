#include "ischem/fibers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ischem/fem.hpp"

namespace ischem {

FiberField::FiberField(std::vector<Vec2> fiber, std::vector<Vec2> transmural)
    : fiber_(std::move(fiber)), transmural_(std::move(transmural)) {
  if (fiber_.size() != transmural_.size()) throw ParamError("fiber field component size mismatch");
  for (size_t e = 0; e < fiber_.size(); ++e) {
    const Vec2& f = fiber_[e];
    const Vec2& n = transmural_[e];
    if (std::abs(f.norm() - 1.0) > 1e-12 || std::abs(n.norm() - 1.0) > 1e-12) {
      throw ParamError("fiber directions must be unit vectors (element " + std::to_string(e) + ")");
    }
    // e_n must be e_f rotated clockwise by 90 degrees: (f.y, -f.x).
    if (n.x() != f.y() || n.y() != -f.x()) {
      throw ParamError("transmural direction is not the -90 deg rotation of the fiber (element " +
                       std::to_string(e) + ")");
    }
  }
}

TensorField::TensorField(std::vector<Eigen::Matrix2d> tensors) : k_(std::move(tensors)) {
  for (size_t e = 0; e < k_.size(); ++e) {
    const auto& m = k_[e];
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (std::abs(m(0, 1) - m(1, 0)) > 1e-14 * scale) {
      throw ParamError("conductivity tensor not symmetric (element " + std::to_string(e) + ")");
    }
    const auto eig = symmetric_eigen(m);
    if (!(eig.value2 > 0.0)) {
      throw ParamError("conductivity tensor not positive definite (element " + std::to_string(e) + ")");
    }
  }
}

TensorField TensorField::constant(int elements, const Eigen::Matrix2d& value) {
  return TensorField(std::vector<Eigen::Matrix2d>(size_t(elements), value));
}

double TensorField::min_eigenvalue() const {
  double v = std::numeric_limits<double>::max();
  for (const auto& m : k_) v = std::min(v, symmetric_eigen(m).value2);
  return v;
}

double TensorField::max_eigenvalue() const {
  double v = std::numeric_limits<double>::lowest();
  for (const auto& m : k_) v = std::max(v, symmetric_eigen(m).value1);
  return v;
}

SymmetricEigen2 symmetric_eigen(const Eigen::Matrix2d& m) {
  const double a = m(0, 0), b = 0.5 * (m(0, 1) + m(1, 0)), c = m(1, 1);
  const double half_tr = 0.5 * (a + c);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
  SymmetricEigen2 out;
  out.value1 = half_tr + disc;
  out.value2 = half_tr - disc;
  if (disc <= 1e-15 * std::max(1.0, std::abs(half_tr))) {
    out.vector1 = Vec2(1.0, 0.0);
    out.vector2 = Vec2(0.0, 1.0);
    return out;
  }
  Vec2 v1(b, out.value1 - a);
  Vec2 alt(out.value1 - c, b);
  if (alt.squaredNorm() > v1.squaredNorm()) v1 = alt;
  v1.normalize();
  out.vector1 = v1;
  out.vector2 = Vec2(-v1.y(), v1.x());
  return out;
}

FiberLaplaceResult solve_fiber_laplace(const Mesh& mesh,
                                       const std::map<BoundaryRegion, double>& dirichlet) {
  bool any = false;
  for (const auto& [region, value] : dirichlet) {
    (void)value;
    if (mesh.region_present(region)) any = true;
  }
  if (!any) throw ConfigError("no Dirichlet region of the fiber Laplace problem is present in the mesh");

  const int n = mesh.node_count();
  std::vector<char> is_dirichlet(size_t(n), 0);
  NodalField values = NodalField::Zero(n);
  for (const auto& be : mesh.boundary_edges()) {
    auto it = dirichlet.find(be.region);
    if (it == dirichlet.end()) continue;
    for (int v : {be.a, be.b}) {
      is_dirichlet[size_t(v)] = 1;
      values[v] = it->second;
    }
  }

  const TensorField identity = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
  const SparseMatrix A = assemble_stiffness(mesh, identity);

  // Symmetric elimination of the Dirichlet rows/columns.
  NodalField rhs = NodalField::Zero(n);
  for (int k = 0; k < A.eigen().outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A.eigen(), k); it; ++it) {
      if (!is_dirichlet[size_t(it.row())] && is_dirichlet[size_t(it.col())]) {
        rhs[it.row()] -= it.value() * values[it.col()];
      }
    }
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < A.eigen().outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(A.eigen(), k); it; ++it) {
      if (is_dirichlet[size_t(it.row())] || is_dirichlet[size_t(it.col())]) continue;
      trip.emplace_back(int(it.row()), int(it.col()), it.value());
    }
  }
  for (int i = 0; i < n; ++i) {
    if (is_dirichlet[size_t(i)]) {
      trip.emplace_back(i, i, 1.0);
      rhs[i] = values[i];
    }
  }
  Eigen::SparseMatrix<double> sys(n, n);
  sys.setFromTriplets(trip.begin(), trip.end());

  FiberLaplaceResult out;
  out.phi = solve_linear(SparseMatrix(std::move(sys), true), rhs);

  // Discrete maximum principle: clamp excursions beyond the Dirichlet range
  // (possible on non-Delaunay triangles) and report them.
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (const auto& [region, value] : dirichlet) {
    if (!mesh.region_present(region)) continue;
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  for (int i = 0; i < n; ++i) {
    const double v = out.phi[i];
    if (v < lo || v > hi) {
      out.clamped_nodes++;
      out.max_violation = std::max(out.max_violation, std::max(lo - v, v - hi));
      out.phi[i] = std::clamp(v, lo, hi);
    }
  }
  return out;
}

FiberLaplaceResult solve_fiber_laplace(const Mesh& mesh) {
  if (!mesh.region_present(BoundaryRegion::EPI)) {
    throw ConfigError("fiber Laplace problem needs an EPI boundary");
  }
  if (!mesh.region_present(BoundaryRegion::ENDO_LV) && !mesh.region_present(BoundaryRegion::ENDO_RV)) {
    throw ConfigError("fiber Laplace problem needs at least one endocardial boundary");
  }
  return solve_fiber_laplace(mesh, {{BoundaryRegion::EPI, 1.0},
                                    {BoundaryRegion::ENDO_LV, 0.0},
                                    {BoundaryRegion::ENDO_RV, 0.0}});
}

FiberField fibers_from_potential(const Mesh& mesh, const NodalField& phi) {
  if (phi.size() != mesh.node_count()) throw ParamError("potential size does not match node count");
  std::vector<Vec2> ef(size_t(mesh.triangle_count()));
  std::vector<Vec2> en(size_t(mesh.triangle_count()));
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& t = mesh.triangle(e);
    const Vec2& p0 = mesh.node(t[0]);
    const Vec2& p1 = mesh.node(t[1]);
    const Vec2& p2 = mesh.node(t[2]);
    const double two_area = 2.0 * mesh.triangle_area(e);
    Vec2 grad = (phi[t[0]] * Vec2(p1.y() - p2.y(), p2.x() - p1.x()) +
                 phi[t[1]] * Vec2(p2.y() - p0.y(), p0.x() - p2.x()) +
                 phi[t[2]] * Vec2(p0.y() - p1.y(), p1.x() - p0.x())) / two_area;
    const double norm = grad.norm();
    if (norm < 1e-12) {
      throw SolverError("degenerate potential gradient on element " + std::to_string(e));
    }
    const Vec2 n = grad / norm;
    en[size_t(e)] = n;
    ef[size_t(e)] = Vec2(-n.y(), n.x());
  }
  return FiberField(std::move(ef), std::move(en));
}

TensorField build_conductivity(const FiberField& fibers, double k_parallel, double k_transverse) {
  if (!(k_parallel >= k_transverse && k_transverse > 0)) {
    throw ParamError("conductivity eigenvalues must satisfy k_parallel >= k_transverse > 0");
  }
  std::vector<Eigen::Matrix2d> tensors(size_t(fibers.size()));
  for (int e = 0; e < fibers.size(); ++e) {
    const Vec2& f = fibers.fiber(e);
    const Vec2& n = fibers.transmural(e);
    tensors[size_t(e)] = k_parallel * f * f.transpose() + k_transverse * n * n.transpose();
  }
  return TensorField(std::move(tensors));
}

TensorField harmonic_mean_tensor(const TensorField& extracellular, const TensorField& intracellular) {
  if (extracellular.size() != intracellular.size()) throw ParamError("tensor field size mismatch");
  std::vector<Eigen::Matrix2d> out(size_t(extracellular.size()));
  for (int e = 0; e < extracellular.size(); ++e) {
    const Eigen::Matrix2d& de = extracellular.at(e);
    const Eigen::Matrix2d& di = intracellular.at(e);
    const Eigen::Matrix2d comm = de * di - di * de;
    if (comm.cwiseAbs().maxCoeff() > 1e-10) {
      throw ParamError("harmonic mean needs commuting tensors (element " + std::to_string(e) + ")");
    }
    // Take the eigenframe from the better-conditioned factor.
    const auto ee = symmetric_eigen(de);
    const auto ei = symmetric_eigen(di);
    const auto frame = (ee.value1 - ee.value2 >= ei.value1 - ei.value2) ? ee : ei;
    Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
    for (const Vec2& v : {frame.vector1, frame.vector2}) {
      const double le = v.dot(de * v);
      const double li = v.dot(di * v);
      k += (le * li / (le + li)) * v * v.transpose();
    }
    out[size_t(e)] = k;
  }
  return TensorField(std::move(out));
}

}  // namespace ischem
