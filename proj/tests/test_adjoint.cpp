#include <doctest.h>

#include <Eigen/SparseCholesky>

#include <cmath>

#include "ischem/adjoint.hpp"
#include "support.hpp"

using namespace ischem;
using ischem::testing::Rand01;

namespace {

struct SmallProblem {
  Mesh mesh;
  TensorField k0;
  StateTrajectory forward;
  double dt;

  static SmallProblem make() {
    Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 8, 8);  // 81 nodes
    Eigen::Matrix2d k;
    k << 0.9, 0.2, 0.2, 0.5;
    TensorField k0 = TensorField::constant(mesh.triangle_count(), k);
    StimulusSpec s;
    s.center = Vec2(0.5, 0.5);
    s.radius = 0.3;
    const auto [u0, w0] = initial_stimulus(mesh, s);
    const double dt = 0.05;
    StateTrajectory forward =
        solve_forward(mesh, k0, nullptr, nullptr, IonicParams{}, u0, w0, dt, 1.0);  // 20 steps
    return {std::move(mesh), std::move(k0), std::move(forward), dt};
  }

  TraceSeries make_residual(unsigned seed, bool zero_first_half = false) const {
    TraceSeries r;
    r.node_ids = mesh.region_nodes({BoundaryRegion::EPI});
    for (int id : r.node_ids) r.coords.push_back(mesh.node(id));
    const int steps = forward.steps();
    r.times.resize(size_t(steps) + 1);
    for (int m = 0; m <= steps; ++m) r.times[size_t(m)] = m * dt;
    r.values = Eigen::MatrixXd::Zero(steps + 1, int(r.node_ids.size()));
    Rand01 rng(seed);
    for (int m = 0; m < steps; ++m) {
      for (int j = 0; j < int(r.node_ids.size()); ++j) {
        const double v = 2.0 * rng.next() - 1.0;
        if (!zero_first_half || m * dt > 0.5) r.values(m, j) = v;
      }
    }
    return r;
  }
};

}  // namespace

TEST_CASE("adjoint: zero residual gives the zero adjoint state") {
  const SmallProblem p = SmallProblem::make();
  TraceSeries r = p.make_residual(1);
  r.values.setZero();
  const AdjointTrajectory adj =
      solve_adjoint(p.mesh, p.k0, p.forward, r, {BoundaryRegion::EPI}, p.dt);
  for (int m = 0; m <= adj.steps(); ++m) {
    CHECK(adj.phi(m).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(adj.psi(m).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("adjoint: final condition holds exactly for any residual") {
  const SmallProblem p = SmallProblem::make();
  const TraceSeries r = p.make_residual(2);
  const AdjointTrajectory adj =
      solve_adjoint(p.mesh, p.k0, p.forward, r, {BoundaryRegion::EPI}, p.dt);
  CHECK(adj.phi(adj.steps()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(adj.psi(adj.steps()).cwiseAbs().maxCoeff() == 0.0);
}

// The linearized forward march that is the exact transpose of the adjoint
// recursion: coefficients frozen at the stored states, implicit Euler with
// the new-level coefficient index, zero initial data one virtual level
// before index 0.
namespace {

struct LinearizedForward {
  std::vector<NodalField> du;  // index 0..N-1

  static LinearizedForward run(const SmallProblem& p, const std::vector<NodalField>& sources) {
    const Mesh& mesh = p.mesh;
    const int n = mesh.node_count();
    const int steps = p.forward.steps();
    const IonicParams params = p.forward.metadata().params;
    const double dt = p.dt;
    const double wdenom = 1.0 + dt * params.recovery_rate;

    const SparseMatrix stiffness = assemble_stiffness(mesh, p.k0);
    const NodalField lumped = assemble_mass(mesh, true).eigen().diagonal();

    LinearizedForward out;
    NodalField du_prev = NodalField::Zero(n);
    NodalField dw_prev = NodalField::Zero(n);
    for (int m = 0; m < steps; ++m) {
      const NodalField& u = p.forward.u(m);
      const NodalField& w = p.forward.w(m);
      NodalField fu(n), fw(n), gu(n);
      for (int i = 0; i < n; ++i) {
        const auto r = reaction_eval(u[i], w[i], params);
        fu[i] = r.df_du;
        fw[i] = r.df_dw;
        gu[i] = r.dg_du;
      }
      // Eliminate dw: dw = (dw_prev - dt gu du) / (1 + dt eps).
      Eigen::SparseMatrix<double> J = stiffness.eigen();
      for (int i = 0; i < n; ++i) {
        J.coeffRef(i, i) += lumped[i] / dt + lumped[i] * (fu[i] - dt * fw[i] * gu[i] / wdenom);
      }
      NodalField rhs = sources[size_t(m)] + lumped.cwiseProduct(du_prev) / dt -
                       lumped.cwiseProduct(fw.cwiseProduct(dw_prev)) / wdenom;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(J);
      REQUIRE(ldlt.info() == Eigen::Success);
      NodalField du = ldlt.solve(rhs);
      NodalField dw = (dw_prev - dt * gu.cwiseProduct(du)) / wdenom;
      out.du.push_back(du);
      du_prev = std::move(du);
      dw_prev = std::move(dw);
    }
    return out;
  }
};

}  // namespace

TEST_CASE("adjoint: discrete duality pairing holds to 1e-8") {
  const SmallProblem p = SmallProblem::make();
  const int n = p.mesh.node_count();
  const int steps = p.forward.steps();
  REQUIRE(n <= 200);
  REQUIRE(steps == 20);

  const TraceSeries r = p.make_residual(3);
  const AdjointTrajectory adj =
      solve_adjoint(p.mesh, p.k0, p.forward, r, {BoundaryRegion::EPI}, p.dt);

  Rand01 rng(17);
  std::vector<NodalField> sources;
  for (int m = 0; m < steps; ++m) {
    NodalField s(n);
    for (int i = 0; i < n; ++i) s[i] = 2.0 * rng.next() - 1.0;
    sources.push_back(s);
  }
  const LinearizedForward lin = LinearizedForward::run(p, sources);

  // <s, Phi> summed over levels 0..N-1 vs <M_b r, du> over the same levels.
  const SparseMatrix boundary_mass = assemble_boundary_mass(p.mesh, {BoundaryRegion::EPI});
  const auto region = p.mesh.region_nodes({BoundaryRegion::EPI});
  double lhs = 0.0, rhs = 0.0;
  for (int m = 0; m < steps; ++m) {
    lhs += sources[size_t(m)].dot(adj.phi(m));
    NodalField rfull = NodalField::Zero(n);
    for (size_t j = 0; j < region.size(); ++j) rfull[region[j]] = r.values(m, int(j));
    rhs += (boundary_mass * rfull).dot(lin.du[size_t(m)]);
  }
  CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(std::abs(lhs), std::abs(rhs)));
}

TEST_CASE("adjoint: linearity in the residual") {
  const SmallProblem p = SmallProblem::make();
  const TraceSeries r1 = p.make_residual(4);
  const TraceSeries r2 = p.make_residual(5);
  TraceSeries combo = r1;
  combo.values = 0.75 * r1.values - 1.5 * r2.values;

  const RegionSet region{BoundaryRegion::EPI};
  const AdjointTrajectory a1 = solve_adjoint(p.mesh, p.k0, p.forward, r1, region, p.dt);
  const AdjointTrajectory a2 = solve_adjoint(p.mesh, p.k0, p.forward, r2, region, p.dt);
  const AdjointTrajectory ac = solve_adjoint(p.mesh, p.k0, p.forward, combo, region, p.dt);
  double worst = 0.0;
  for (int m = 0; m <= ac.steps(); ++m) {
    worst = std::max(worst,
                     (ac.phi(m) - 0.75 * a1.phi(m) + 1.5 * a2.phi(m)).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (ac.psi(m) - 0.75 * a1.psi(m) + 1.5 * a2.psi(m)).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("adjoint: backward causality") {
  const SmallProblem p = SmallProblem::make();
  const TraceSeries full = p.make_residual(6, false);
  const TraceSeries upper = p.make_residual(6, true);  // zero for t <= T/2

  const RegionSet region{BoundaryRegion::EPI};
  const AdjointTrajectory af = solve_adjoint(p.mesh, p.k0, p.forward, full, region, p.dt);
  const AdjointTrajectory au = solve_adjoint(p.mesh, p.k0, p.forward, upper, region, p.dt);
  for (int m = 0; m <= af.steps(); ++m) {
    if (m * p.dt > 0.5) {
      CHECK((af.phi(m) - au.phi(m)).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("residual trace arithmetic") {
  const SmallProblem p = SmallProblem::make();
  const TraceSeries a = p.make_residual(7);

  SUBCASE("measured equals simulated") {
    const TraceSeries r = residual_trace(a, a);
    CHECK(r.values.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero simulation gives the negated measurement") {
    TraceSeries zero = a;
    zero.values.setZero();
    const TraceSeries r = residual_trace(a, zero);
    CHECK((r.values + a.values).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("scaling consistency") {
    TraceSeries b = p.make_residual(8);
    TraceSeries half = b;
    half.values = a.values + 0.5 * b.values;
    const TraceSeries r = residual_trace(a, half);
    CHECK((r.values - 0.5 * b.values).cwiseAbs().maxCoeff() <= 1e-14);
  }

  SUBCASE("mismatched supports are rejected") {
    TraceSeries other = a;
    other.node_ids.back() += 1;
    CHECK_THROWS_AS(residual_trace(other, a), ParamError);
  }
}
