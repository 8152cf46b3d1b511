#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "ischem/fem.hpp"
#include "support.hpp"

using namespace ischem;
using ischem::testing::Rand01;

TEST_CASE("P1 mass matrix on the unit right triangle") {
  const Mesh tri = ischem::testing::unit_right_triangle();

  SUBCASE("consistent element matrix") {
    const SparseMatrix M = assemble_mass(tri, false);
    const Eigen::MatrixXd D = Eigen::MatrixXd(M.eigen());
    const double s = 0.5 / 12.0;  // area / 12
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(D(i, j) == doctest::Approx(s * (i == j ? 2.0 : 1.0)).epsilon(1e-14));
      }
    }
  }

  SUBCASE("lumped rows are area/3") {
    const SparseMatrix M = assemble_mass(tri, true);
    const Eigen::VectorXd d = M.eigen().diagonal();
    for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(0.5 / 3.0).epsilon(1e-14));
  }
}

TEST_CASE("mass matrix integrates constants exactly") {
  const Mesh mesh = make_rect_mesh({0, 0}, {2, 1}, 8, 5);
  for (bool lumped : {false, true}) {
    const SparseMatrix M = assemble_mass(mesh, lumped);
    const NodalField ones = NodalField::Ones(mesh.node_count());
    CHECK(std::abs(ones.dot(M * ones) - mesh.total_area()) <= 1e-12 * mesh.total_area());
    CHECK(M.max_asymmetry() <= 1e-12);
  }
}

TEST_CASE("mass matrix is positive definite (dense spot check)") {
  const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 4, 4);
  const Eigen::MatrixXd D = Eigen::MatrixXd(assemble_mass(mesh, false).eigen());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("P1 stiffness matrix") {
  const Mesh tri = ischem::testing::unit_right_triangle();
  const TensorField identity = TensorField::constant(1, Eigen::Matrix2d::Identity());

  SUBCASE("textbook isotropic element matrix") {
    const Eigen::MatrixXd D = Eigen::MatrixXd(assemble_stiffness(tri, identity).eigen());
    Eigen::Matrix3d expected;
    expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
    expected *= 0.5;
    CHECK((D - expected).cwiseAbs().maxCoeff() <= 1e-14);
  }

  SUBCASE("constants span the kernel") {
    const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 6, 6);
    const TensorField id = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
    const SparseMatrix A = assemble_stiffness(mesh, id);
    const NodalField ones = NodalField::Ones(mesh.node_count());
    CHECK((A * ones).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(A.max_asymmetry() <= 1e-12);
  }

  SUBCASE("patch test: exact energy of a linear field") {
    const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 7, 9);
    Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
    k(0, 0) = 1.7;
    k(1, 1) = 0.3;
    const SparseMatrix A = assemble_stiffness(mesh, TensorField::constant(mesh.triangle_count(), k));
    NodalField v(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) v[i] = mesh.node(i).x();
    CHECK(std::abs(v.dot(A * v) - 1.7 * mesh.total_area()) <= 1e-10);
  }

  SUBCASE("energy is nonnegative and vanishes only on constants") {
    const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 5, 5);
    const TensorField id = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
    const SparseMatrix A = assemble_stiffness(mesh, id);
    Rand01 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
      NodalField v(mesh.node_count());
      for (int i = 0; i < v.size(); ++i) v[i] = rng.next() - 0.5;
      const double energy = v.dot(A * v);
      CHECK(energy >= -1e-12);
      const double spread = (v.array() - v.mean()).abs().maxCoeff();
      if (spread > 1e-6) CHECK(energy > 0.0);
    }
    const NodalField c = NodalField::Constant(mesh.node_count(), 3.25);
    CHECK(std::abs(c.dot(A * c)) <= 1e-10);
  }
}

TEST_CASE("boundary mass matrix") {
  const Mesh tri = ischem::testing::unit_right_triangle();

  SUBCASE("single-edge blocks and total perimeter") {
    const SparseMatrix Mb = assemble_boundary_mass(tri, {BoundaryRegion::EPI});
    const Eigen::MatrixXd D = Eigen::MatrixXd(Mb.eigen());
    // Edge (0,1) has length 1: off-diagonal L/6.
    CHECK(D(0, 1) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    // Node 0 touches edges (0,1) and (2,0), both of length 1: diagonal 2L/3.
    CHECK(D(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    const NodalField ones = NodalField::Ones(3);
    const double perimeter = 2.0 + std::sqrt(2.0);
    CHECK(std::abs(ones.dot(Mb * ones) - perimeter) <= 1e-12);
  }

  SUBCASE("support is exactly the selected boundary nodes") {
    const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 4, 4);
    const SparseMatrix Mb = assemble_boundary_mass(mesh, RegionSet::all());
    const auto boundary_nodes = mesh.region_nodes(RegionSet::all());
    const NodalField ones = NodalField::Ones(mesh.node_count());
    const NodalField row_sums = Mb * ones;
    for (int i = 0; i < mesh.node_count(); ++i) {
      const bool on_boundary =
          std::find(boundary_nodes.begin(), boundary_nodes.end(), i) != boundary_nodes.end();
      if (on_boundary) {
        CHECK(row_sums[i] > 0.0);
      } else {
        CHECK(row_sums[i] == 0.0);
      }
    }
  }

  SUBCASE("empty region set is rejected") {
    CHECK_THROWS_AS(assemble_boundary_mass(tri, RegionSet{}), ParamError);
  }
}

TEST_CASE("solve_linear") {
  SUBCASE("identity system") {
    Eigen::SparseMatrix<double> id(3, 3);
    id.setIdentity();
    const NodalField b = (NodalField(3) << 1, 2, 3).finished();
    CHECK((solve_linear(SparseMatrix(id, true), b) - b).norm() <= 1e-12);
  }

  SUBCASE("small SPD diagonal system") {
    Eigen::SparseMatrix<double> a(2, 2);
    a.insert(0, 0) = 2.0;
    a.insert(1, 1) = 3.0;
    const NodalField b = (NodalField(2) << 2, 3).finished();
    const NodalField x = solve_linear(SparseMatrix(a, true), b);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("pure-Neumann system in zero-mean mode") {
    const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 6, 6);
    const TensorField id = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
    const SparseMatrix A = assemble_stiffness(mesh, id);
    Rand01 rng(3);
    NodalField y(mesh.node_count());
    for (int i = 0; i < y.size(); ++i) y[i] = rng.next();
    const NodalField b = A * y;  // compatible by construction

    SolveOptions opts;
    opts.tol = 1e-8;
    opts.zero_mean_nodes = mesh.region_nodes(RegionSet::all());
    const NodalField x = solve_linear(A, b, opts);
    double mean = 0.0;
    for (int i : opts.zero_mean_nodes) mean += x[i];
    mean /= double(opts.zero_mean_nodes.size());
    CHECK(std::abs(mean) <= 1e-10);
    CHECK((A * x - b).norm() <= 1e-8 * b.norm());
  }

  SUBCASE("singular system without zero-mean mode fails loudly") {
    const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 3, 3);
    const TensorField id = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
    const SparseMatrix A = assemble_stiffness(mesh, id);
    NodalField b = NodalField::Ones(mesh.node_count());  // incompatible
    CHECK_THROWS_AS(solve_linear(A, b), SolverError);
  }
}
