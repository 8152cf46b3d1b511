#include "ischem/fem.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace ischem {

namespace {

// Gradients of the three barycentric basis functions on a triangle, and its
// area. grad(lambda_k) is constant per element for P1.
struct ElementGeometry {
  std::array<Vec2, 3> grad;
  double area;
};

ElementGeometry element_geometry(const Mesh& mesh, int e) {
  const auto& t = mesh.triangle(e);
  const Vec2& p0 = mesh.node(t[0]);
  const Vec2& p1 = mesh.node(t[1]);
  const Vec2& p2 = mesh.node(t[2]);
  const double two_area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
  ElementGeometry g;
  g.area = 0.5 * two_area;
  g.grad[0] = Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / two_area;
  g.grad[1] = Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / two_area;
  g.grad[2] = Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / two_area;
  return g;
}

}  // namespace

SparseMatrix::SparseMatrix(Eigen::SparseMatrix<double> m, bool symmetric)
    : m_(std::move(m)), symmetric_(symmetric) {
  m_.makeCompressed();
}

double SparseMatrix::max_asymmetry() const {
  Eigen::SparseMatrix<double> d = m_ - Eigen::SparseMatrix<double>(m_.transpose());
  double mx = 0.0;
  for (int k = 0; k < d.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(d, k); it; ++it) {
      mx = std::max(mx, std::abs(it.value()));
    }
  }
  return mx;
}

SparseMatrix assemble_mass(const Mesh& mesh, bool lumped) {
  const int n = mesh.node_count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(size_t(mesh.triangle_count()) * (lumped ? 3 : 9));
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& t = mesh.triangle(e);
    const double area = mesh.triangle_area(e);
    if (lumped) {
      for (int i = 0; i < 3; ++i) trip.emplace_back(t[size_t(i)], t[size_t(i)], area / 3.0);
    } else {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          trip.emplace_back(t[size_t(i)], t[size_t(j)], area / 12.0 * (i == j ? 2.0 : 1.0));
        }
      }
    }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return SparseMatrix(std::move(m), true);
}

SparseMatrix assemble_stiffness(const Mesh& mesh, const TensorField& K) {
  if (K.size() != mesh.triangle_count()) {
    throw ParamError("tensor field size does not match element count");
  }
  const int n = mesh.node_count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(size_t(mesh.triangle_count()) * 9);
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& t = mesh.triangle(e);
    const auto g = element_geometry(mesh, e);
    const Eigen::Matrix2d& k = K.at(e);
    for (int i = 0; i < 3; ++i) {
      const Vec2 kg = k * g.grad[size_t(i)];
      for (int j = 0; j < 3; ++j) {
        trip.emplace_back(t[size_t(i)], t[size_t(j)], g.area * kg.dot(g.grad[size_t(j)]));
      }
    }
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return SparseMatrix(std::move(m), true);
}

SparseMatrix assemble_boundary_mass(const Mesh& mesh, RegionSet regions) {
  if (regions.empty()) throw ParamError("boundary mass needs a nonempty region set");
  const int n = mesh.node_count();
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& be : mesh.boundary_edges()) {
    if (!regions.contains(be.region)) continue;
    const double len = (mesh.node(be.a) - mesh.node(be.b)).norm();
    trip.emplace_back(be.a, be.a, len / 3.0);
    trip.emplace_back(be.b, be.b, len / 3.0);
    trip.emplace_back(be.a, be.b, len / 6.0);
    trip.emplace_back(be.b, be.a, len / 6.0);
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return SparseMatrix(std::move(m), true);
}

NodalField solve_linear(const SparseMatrix& A, const NodalField& b, const SolveOptions& options) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw ParamError("solve_linear: dimension mismatch");
  }
  const double bnorm = b.norm();
  auto check = [&](const NodalField& x) {
    const double res = (A.eigen() * x - b).norm();
    const double rel = bnorm > 0 ? res / bnorm : res;
    if (!(rel <= options.tol)) {
      throw SolverError("linear solve residual " + std::to_string(rel) + " exceeds tol " +
                        std::to_string(options.tol));
    }
  };

  if (!options.zero_mean_nodes.empty()) {
    // Singular consistent system: diagonally preconditioned CG from zero,
    // then subtract the mean over the requested nodes (A * 1 = 0 keeps the
    // residual unchanged).
    const auto& M = A.eigen();
    NodalField diag = M.diagonal();
    for (int i = 0; i < diag.size(); ++i) {
      if (diag[i] <= 0) diag[i] = 1.0;
    }
    NodalField x = NodalField::Zero(b.size());
    NodalField r = b;
    NodalField z = r.cwiseQuotient(diag);
    NodalField p = z;
    double rz = r.dot(z);
    const double stop = options.tol * (bnorm > 0 ? bnorm : 1.0) * 0.1;
    for (int it = 0; it < options.max_iterations && r.norm() > stop; ++it) {
      const NodalField Ap = M * p;
      const double alpha = rz / p.dot(Ap);
      x += alpha * p;
      r -= alpha * Ap;
      z = r.cwiseQuotient(diag);
      const double rz2 = r.dot(z);
      p = z + (rz2 / rz) * p;
      rz = rz2;
    }
    double mean = 0.0;
    for (int i : options.zero_mean_nodes) mean += x[i];
    mean /= double(options.zero_mean_nodes.size());
    x.array() -= mean;
    check(x);
    return x;
  }

  if (A.symmetric()) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(A.eigen());
    if (ldlt.info() == Eigen::Success) {
      NodalField x = ldlt.solve(b);
      if (ldlt.info() == Eigen::Success) {
        check(x);
        return x;
      }
    }
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A.eigen());
  if (lu.info() != Eigen::Success) throw SolverError("sparse factorization failed");
  NodalField x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw SolverError("sparse back-substitution failed");
  check(x);
  return x;
}

}  // namespace ischem
