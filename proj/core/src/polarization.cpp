#include "ischem/polarization.hpp"

#include <cmath>
#include <vector>

#include "ischem/fem.hpp"

namespace ischem {

namespace {

void check_pair(const Eigen::Matrix2d& K0, const Eigen::Matrix2d& K1) {
  for (const auto* m : {&K0, &K1}) {
    const double scale = std::max(1.0, m->cwiseAbs().maxCoeff());
    if (std::abs((*m)(0, 1) - (*m)(1, 0)) > 1e-12 * scale) {
      throw ParamError("polarization: tensors must be symmetric");
    }
    if (!(symmetric_eigen(*m).value2 > 0)) {
      throw ParamError("polarization: tensors must be positive definite");
    }
  }
  const Eigen::Matrix2d comm = K0 * K1 - K1 * K0;
  if (comm.cwiseAbs().maxCoeff() > 1e-10) {
    throw ParamError("polarization: tensors must commute (shared eigenvectors)");
  }
}

struct OracleMesh {
  Mesh mesh;
  std::vector<char> inside;     // per element
  std::vector<char> dirichlet;  // per node, box boundary
};

// Structured polar mesh of a disk embedded in a box: rings are concentric
// inside the disk, then follow the blend between the circle and the square
// outside, so the interface is exactly a ring of edges.
OracleMesh disk_in_box_mesh(double radius, double box_size, double h) {
  const double half = box_size / 2.0;
  const int n_theta = std::max(64, int(std::lround(2.0 * M_PI * radius / h)));
  const int n_in = std::max(8, int(std::lround(radius / h)));

  // Radial levels outside the disk: spacing h at the interface, geometric
  // growth toward the box boundary.
  std::vector<double> outer_frac;
  {
    const double d_min = half - radius;  // nearest box distance
    double d = 0.0, step = h;
    while (d < d_min) {
      d += step;
      outer_frac.push_back(std::min(1.0, d / d_min));
      step *= 1.25;
    }
    outer_frac.back() = 1.0;
  }
  const int n_out = int(outer_frac.size());

  auto box_radius = [&](double th) {
    return half / std::max(std::abs(std::cos(th)), std::abs(std::sin(th)));
  };

  std::vector<Vec2> nodes;
  nodes.emplace_back(0.0, 0.0);  // center
  auto ring_node = [&](int ring, int j) {
    // ring 0 is the center node; rings 1..n_in lie inside the disk; rings
    // n_in+1 .. n_in+n_out outside.
    if (ring == 0) return 0;
    return 1 + (ring - 1) * n_theta + ((j % n_theta + n_theta) % n_theta);
  };
  for (int ring = 1; ring <= n_in + n_out; ++ring) {
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * M_PI * j / n_theta;
      double rho;
      if (ring <= n_in) {
        rho = radius * double(ring) / n_in;
      } else {
        rho = radius + outer_frac[size_t(ring - n_in - 1)] * (box_radius(th) - radius);
      }
      nodes.emplace_back(rho * std::cos(th), rho * std::sin(th));
    }
  }

  std::vector<std::array<int, 3>> tris;
  std::vector<char> inside;
  for (int j = 0; j < n_theta; ++j) {  // center fan
    tris.push_back({0, ring_node(1, j), ring_node(1, j + 1)});
    inside.push_back(1);
  }
  for (int ring = 1; ring < n_in + n_out; ++ring) {
    for (int j = 0; j < n_theta; ++j) {
      // CCW in physical coordinates: radially out first, then along the ring.
      const int a = ring_node(ring, j), b = ring_node(ring + 1, j);
      const int c = ring_node(ring + 1, j + 1), d = ring_node(ring, j + 1);
      if ((ring + j) % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
      inside.push_back(ring < n_in ? 1 : 0);
      inside.push_back(ring < n_in ? 1 : 0);
    }
  }

  std::vector<BoundaryEdge> boundary;
  const int last = n_in + n_out;
  for (int j = 0; j < n_theta; ++j) {
    boundary.push_back({ring_node(last, j), ring_node(last, j + 1), BoundaryRegion::EPI});
  }
  std::vector<char> dirichlet(nodes.size(), 0);
  for (int j = 0; j < n_theta; ++j) dirichlet[size_t(ring_node(last, j))] = 1;

  return {Mesh(std::move(nodes), std::move(tris), std::move(boundary)), std::move(inside),
          std::move(dirichlet)};
}

}  // namespace

PolarizationTensor polarization_disk(const Eigen::Matrix2d& K0, const Eigen::Matrix2d& K1) {
  check_pair(K0, K1);
  // Shared eigenframe; take it from the better-separated spectrum.
  const auto e0 = symmetric_eigen(K0);
  const auto e1 = symmetric_eigen(K1);
  const auto frame = (e0.value1 - e0.value2 >= e1.value1 - e1.value2) ? e0 : e1;
  const Vec2 v1 = frame.vector1, v2 = frame.vector2;
  const double kappa1 = v1.dot(K0 * v1), kappa2 = v2.dot(K0 * v2);
  const double lambda1 = v1.dot(K1 * v1), lambda2 = v2.dot(K1 * v2);

  // Rescaling by 1/sqrt(kappa_i) maps the background to the identity and the
  // disk to an ellipse with these semiaxes.
  const double p = 1.0 / std::sqrt(kappa1);
  const double q = 1.0 / std::sqrt(kappa2);
  const double contrast1 = lambda1 / kappa1;
  const double contrast2 = lambda2 / kappa2;
  const double m1 = (p + q) / (p + q * contrast1);
  const double m2 = (p + q) / (q + p * contrast2);
  return m1 * v1 * v1.transpose() + m2 * v2 * v2.transpose();
}

PolarizationTensor transmission_oracle(const Eigen::Matrix2d& K0, const Eigen::Matrix2d& K1,
                                       double radius, double box_size, double h_oracle) {
  check_pair(K0, K1);
  if (!(radius > 0)) throw ParamError("oracle: radius must be positive");
  if (box_size < 20.0 * radius) {
    throw ParamError("oracle: box must be at least 20x the disk radius");
  }
  if (2.0 * radius / h_oracle < 16.0) {
    throw ParamError("oracle: disk must span at least 16 elements across");
  }

  OracleMesh om = disk_in_box_mesh(radius, box_size, h_oracle);
  const Mesh& mesh = om.mesh;
  const int n = mesh.node_count();

  std::vector<Eigen::Matrix2d> per_element(size_t(mesh.triangle_count()));
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    per_element[size_t(e)] = om.inside[size_t(e)] ? K1 : K0;
  }
  const SparseMatrix stiffness = assemble_stiffness(mesh, TensorField(std::move(per_element)));

  // Dirichlet elimination of the box-boundary nodes (correction is zero there).
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < stiffness.eigen().outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness.eigen(), k); it; ++it) {
      if (om.dirichlet[size_t(it.row())] || om.dirichlet[size_t(it.col())]) continue;
      trip.emplace_back(int(it.row()), int(it.col()), it.value());
    }
  }
  for (int i = 0; i < n; ++i) {
    if (om.dirichlet[size_t(i)]) trip.emplace_back(i, i, 1.0);
  }
  Eigen::SparseMatrix<double> sys(n, n);
  sys.setFromTriplets(trip.begin(), trip.end());
  const SparseMatrix reduced(std::move(sys), true);

  double marked_area = 0.0;
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    if (om.inside[size_t(e)]) marked_area += mesh.triangle_area(e);
  }

  PolarizationTensor M = PolarizationTensor::Identity();
  for (int dir = 0; dir < 2; ++dir) {
    // v = x_j + vt with vt in H^1_0: K_eps grad(vt) pairs against the
    // contrast only inside the disk.
    NodalField rhs = NodalField::Zero(n);
    const Vec2 ej = (dir == 0) ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
    const Vec2 jump = (K1 - K0) * ej;
    for (int e = 0; e < mesh.triangle_count(); ++e) {
      if (!om.inside[size_t(e)]) continue;
      const auto& t = mesh.triangle(e);
      const Vec2& p0 = mesh.node(t[0]);
      const Vec2& p1 = mesh.node(t[1]);
      const Vec2& p2 = mesh.node(t[2]);
      // area * jump . grad(lambda_i), with grad(lambda_i) = perp_i / (2 area)
      rhs[t[0]] -= 0.5 * jump.dot(Vec2(p1.y() - p2.y(), p2.x() - p1.x()));
      rhs[t[1]] -= 0.5 * jump.dot(Vec2(p2.y() - p0.y(), p0.x() - p2.x()));
      rhs[t[2]] -= 0.5 * jump.dot(Vec2(p0.y() - p1.y(), p1.x() - p0.x()));
    }
    for (int i = 0; i < n; ++i) {
      if (om.dirichlet[size_t(i)]) rhs[i] = 0.0;
    }
    const NodalField vt = solve_linear(reduced, rhs, {.tol = 1e-9});

    Vec2 mean_grad = Vec2::Zero();
    for (int e = 0; e < mesh.triangle_count(); ++e) {
      if (!om.inside[size_t(e)]) continue;
      const auto& t = mesh.triangle(e);
      const Vec2& p0 = mesh.node(t[0]);
      const Vec2& p1 = mesh.node(t[1]);
      const Vec2& p2 = mesh.node(t[2]);
      const double two_area = 2.0 * mesh.triangle_area(e);
      const Vec2 grad = (vt[t[0]] * Vec2(p1.y() - p2.y(), p2.x() - p1.x()) +
                         vt[t[1]] * Vec2(p2.y() - p0.y(), p0.x() - p2.x()) +
                         vt[t[2]] * Vec2(p0.y() - p1.y(), p1.x() - p0.x())) / two_area;
      mean_grad += mesh.triangle_area(e) * grad;
    }
    mean_grad /= marked_area;
    M(0, dir) += mean_grad.x();
    M(1, dir) += mean_grad.y();
  }
  return M;
}

}  // namespace ischem
