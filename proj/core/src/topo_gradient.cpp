#include "ischem/topo_gradient.hpp"

#include <algorithm>
#include <cmath>

#include "ischem/polarization.hpp"

namespace ischem {

double mismatch_J(const TraceSeries& simulated, const TraceSeries& measured, const Mesh& mesh,
                  RegionSet regions, double dt) {
  const TraceSeries residual = residual_trace(measured, simulated);
  const SparseMatrix boundary_mass = assemble_boundary_mass(mesh, regions);
  const std::vector<int> region_ids = mesh.region_nodes(regions);
  if (residual.node_ids != region_ids) {
    throw ParamError("mismatch_J: traces do not live on the selected region nodes");
  }
  const int nt = int(residual.times.size());
  NodalField r = NodalField::Zero(mesh.node_count());
  double value = 0.0;
  for (int t = 0; t < nt; ++t) {
    r.setZero();
    for (size_t j = 0; j < region_ids.size(); ++j) r[region_ids[j]] = residual.values(t, int(j));
    const double weight = (t == 0 || t == nt - 1) ? 0.5 : 1.0;
    value += 0.5 * weight * dt * r.dot(boundary_mass.eigen() * r);
  }
  return value;
}

namespace {

// Per-node commuting pair rebuilt from the area-averaged tensors: the frame
// diagonalizes the averaged K0; K1 is projected onto that frame.
struct NodalPair {
  Eigen::Matrix2d k0, k1;
};

std::vector<NodalPair> nodal_tensor_pairs(const Mesh& mesh, const TensorField& K0,
                                          const TensorField& K1) {
  const int n = mesh.node_count();
  std::vector<Eigen::Matrix2d> avg0(size_t(n), Eigen::Matrix2d::Zero());
  std::vector<Eigen::Matrix2d> avg1(size_t(n), Eigen::Matrix2d::Zero());
  std::vector<double> weight(size_t(n), 0.0);
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const double area = mesh.triangle_area(e);
    for (int v : mesh.triangle(e)) {
      avg0[size_t(v)] += area * K0.at(e);
      avg1[size_t(v)] += area * K1.at(e);
      weight[size_t(v)] += area;
    }
  }
  std::vector<NodalPair> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix2d k0bar = avg0[size_t(i)] / weight[size_t(i)];
    const Eigen::Matrix2d k1bar = avg1[size_t(i)] / weight[size_t(i)];
    const auto frame = symmetric_eigen(k0bar);
    const Vec2 v1 = frame.vector1, v2 = frame.vector2;
    out[size_t(i)].k0 = frame.value1 * v1 * v1.transpose() + frame.value2 * v2 * v2.transpose();
    out[size_t(i)].k1 = v1.dot(k1bar * v1) * v1 * v1.transpose() +
                        v2.dot(k1bar * v2) * v2 * v2.transpose();
  }
  return out;
}

}  // namespace

GradientField assemble_gradient_field(const Mesh& mesh, const StateTrajectory& forward,
                                      const AdjointTrajectory& adjoint, const TensorField& K0,
                                      const TensorField& K1, const IonicParams& params, double dt,
                                      double mask_d0) {
  const int n = mesh.node_count();
  if (forward.u(0).size() != n) throw ParamError("gradient: forward trajectory mesh mismatch");
  if (adjoint.steps() != forward.steps()) throw ParamError("gradient: trajectory grids differ");
  if (K0.size() != mesh.triangle_count() || K1.size() != mesh.triangle_count()) {
    throw ParamError("gradient: tensor fields do not match the mesh");
  }

  const auto pairs = nodal_tensor_pairs(mesh, K0, K1);
  std::vector<Eigen::Matrix2d> contrast(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    contrast[size_t(i)] = polarization_disk(pairs[size_t(i)].k0, pairs[size_t(i)].k1) *
                          (pairs[size_t(i)].k0 - pairs[size_t(i)].k1);
  }

  // Precompute element gradient geometry and node weights.
  const int ne = mesh.triangle_count();
  std::vector<std::array<Vec2, 3>> grads(static_cast<size_t>(ne));
  std::vector<double> node_weight(size_t(n), 0.0);
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.triangle(e);
    const Vec2& p0 = mesh.node(t[0]);
    const Vec2& p1 = mesh.node(t[1]);
    const Vec2& p2 = mesh.node(t[2]);
    const double two_area = 2.0 * mesh.triangle_area(e);
    grads[size_t(e)] = {Vec2(p1.y() - p2.y(), p2.x() - p1.x()) / two_area,
                        Vec2(p2.y() - p0.y(), p0.x() - p2.x()) / two_area,
                        Vec2(p0.y() - p1.y(), p1.x() - p0.x()) / two_area};
    for (int v : t) node_weight[size_t(v)] += mesh.triangle_area(e);
  }

  const int steps = forward.steps();
  NodalField g = NodalField::Zero(n);
  std::vector<Vec2> grad_u(static_cast<size_t>(n)), grad_phi(static_cast<size_t>(n));
  for (int m = 0; m <= steps; ++m) {
    const double weight = ((m == 0 || m == steps) ? 0.5 : 1.0) * dt;
    const NodalField& u = forward.u(m);
    const NodalField& w = forward.w(m);
    const NodalField& phi = adjoint.phi(m);
    std::fill(grad_u.begin(), grad_u.end(), Vec2::Zero());
    std::fill(grad_phi.begin(), grad_phi.end(), Vec2::Zero());
    for (int e = 0; e < ne; ++e) {
      const auto& t = mesh.triangle(e);
      const double area = mesh.triangle_area(e);
      Vec2 gu = Vec2::Zero(), gp = Vec2::Zero();
      for (int k = 0; k < 3; ++k) {
        gu += u[t[size_t(k)]] * grads[size_t(e)][size_t(k)];
        gp += phi[t[size_t(k)]] * grads[size_t(e)][size_t(k)];
      }
      for (int v : t) {
        grad_u[size_t(v)] += area * gu;
        grad_phi[size_t(v)] += area * gp;
      }
    }
    for (int i = 0; i < n; ++i) {
      const Vec2 gu = grad_u[size_t(i)] / node_weight[size_t(i)];
      const Vec2 gp = grad_phi[size_t(i)] / node_weight[size_t(i)];
      const double f = reaction_eval(u[i], w[i], params).f;
      g[i] += weight * ((contrast[size_t(i)] * gu).dot(gp) + f * phi[i]);
    }
  }

  GradientField out;
  out.values = std::move(g);
  out.mask_d0 = mask_d0;
  out.mask.assign(size_t(n), 0);
  for (int i = 0; i < n; ++i) {
    out.mask[size_t(i)] = mesh.distance_to_boundary(mesh.node(i)) >= mask_d0 ? 1 : 0;
  }
  return out;
}

LocalizationResult locate_minima(const GradientField& gradient, const Mesh& mesh, int count,
                                 double min_separation) {
  if (count < 1) throw ParamError("locate_minima: count must be >= 1");
  if (gradient.values.size() != mesh.node_count()) {
    throw ParamError("locate_minima: field does not match the mesh");
  }
  const int n = mesh.node_count();
  bool any_masked = false;
  for (int i = 0; i < n; ++i) any_masked |= gradient.mask[size_t(i)] != 0;
  if (!any_masked) throw ParamError("locate_minima: empty admissible mask");

  // Local minima on the masked node graph; <= keeps plateau nodes, the
  // (value, index) sort makes ties deterministic.
  std::vector<int> candidates;
  for (int i = 0; i < n; ++i) {
    if (!gradient.mask[size_t(i)]) continue;
    bool is_min = true;
    for (int j : mesh.node_neighbors()[size_t(i)]) {
      if (gradient.mask[size_t(j)] && gradient.values[j] < gradient.values[i]) {
        is_min = false;
        break;
      }
    }
    if (is_min) candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (gradient.values[a] != gradient.values[b]) return gradient.values[a] < gradient.values[b];
    return a < b;
  });

  LocalizationResult out;
  for (int i : candidates) {
    if (int(out.minima.size()) >= count) break;
    const Vec2 p = mesh.node(i);
    bool clear = true;
    for (const auto& m : out.minima) {
      if ((m.position - p).norm() < min_separation) {
        clear = false;
        break;
      }
    }
    if (clear) out.minima.push_back({i, p, gradient.values[i]});
  }
  out.global = out.minima.front();
  return out;
}

}  // namespace ischem
