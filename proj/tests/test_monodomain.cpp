#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ischem/monodomain.hpp"
#include "support.hpp"

using namespace ischem;
using ischem::testing::Rand01;

TEST_CASE("reaction terms and their derivatives") {
  const IonicParams p;  // A = 8, a = 0.15, eps = 0.05

  SUBCASE("rest state") {
    const auto r = reaction_eval(0.0, 0.0, p);
    CHECK(r.f == 0.0);
    CHECK(r.g == 0.0);
  }

  SUBCASE("excited state (1, 0)") {
    const auto r = reaction_eval(1.0, 0.0, p);
    CHECK(r.f == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(r.g == doctest::Approx(-0.06).epsilon(1e-12));
  }

  SUBCASE("mid state (0.5, 0.2)") {
    const auto r = reaction_eval(0.5, 0.2, p);
    CHECK(r.f == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(r.g == doctest::Approx(-0.12).epsilon(1e-12));
  }

  SUBCASE("analytic partials match central differences") {
    Rand01 rng(23);
    const double h = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
      const double u = rng.next();
      const double w = rng.next() * p.w_max();
      const auto r = reaction_eval(u, w, p);
      const double fu = (reaction_eval(u + h, w, p).f - reaction_eval(u - h, w, p).f) / (2 * h);
      const double fw = (reaction_eval(u, w + h, p).f - reaction_eval(u, w - h, p).f) / (2 * h);
      const double gu = (reaction_eval(u + h, w, p).g - reaction_eval(u - h, w, p).g) / (2 * h);
      const double gw = (reaction_eval(u, w + h, p).g - reaction_eval(u, w - h, p).g) / (2 * h);
      CHECK(std::abs(r.df_du - fu) <= 1e-6);
      CHECK(std::abs(r.df_dw - fw) <= 1e-6);
      CHECK(std::abs(r.dg_du - gu) <= 1e-6);
      CHECK(std::abs(r.dg_dw - gw) <= 1e-6);
    }
  }

  SUBCASE("parameter validation") {
    IonicParams bad;
    bad.threshold = 1.5;
    CHECK_THROWS_AS(bad.check(), ParamError);
    bad = IonicParams{};
    bad.excitation = -1.0;
    CHECK_THROWS_AS(bad.check(), ParamError);
  }
}

TEST_CASE("initial stimulus") {
  const Mesh mesh = make_rect_mesh({0, 0}, {2, 2}, 20, 20);
  StimulusSpec s;
  s.center = Vec2(1.0, 1.0);
  s.radius = 0.4;
  s.amplitude = 1.0;

  SUBCASE("peak at the center, zero outside, inside S") {
    const auto [u0, w0] = initial_stimulus(mesh, s);
    const int center = mesh.nearest_node(s.center);
    CHECK(u0[center] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(u0.maxCoeff() <= 1.0);
    CHECK(u0.minCoeff() >= 0.0);
    CHECK(u0.sum() > 0.0);
    CHECK(w0.cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < mesh.node_count(); ++i) {
      if ((mesh.node(i) - s.center).norm() >= s.radius) CHECK(u0[i] == 0.0);
    }
  }

  SUBCASE("amplitude above 1 would leave S") {
    StimulusSpec bad = s;
    bad.amplitude = 1.5;
    CHECK_THROWS_AS(initial_stimulus(mesh, bad), ParamError);
  }

  SUBCASE("stimulus must fit inside the domain") {
    StimulusSpec bad = s;
    bad.center = Vec2(0.1, 0.1);
    CHECK_THROWS_AS(initial_stimulus(mesh, bad), ParamError);
  }
}

TEST_CASE("element indicator of inclusions") {
  const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 40, 40);

  SUBCASE("empty list") {
    const IndicatorField ind = indicator_field(mesh, {}, 0.1);
    CHECK(ind.area == 0.0);
    for (double v : ind.element_values) CHECK(v == 0.0);
  }

  SUBCASE("disk area converges") {
    const Inclusion inc{{0.5, 0.5}, 0.2};
    const IndicatorField ind = indicator_field(mesh, {inc}, 0.25);
    const double exact = M_PI * 0.04;
    CHECK(std::abs(ind.area - exact) / exact <= 0.10);
  }

  SUBCASE("inclusion outside the domain") {
    CHECK_THROWS_AS(indicator_field(mesh, {{{2.0, 2.0}, 0.1}}, 0.1), ParamError);
  }

  SUBCASE("boundary separation is enforced") {
    CHECK_THROWS_AS(indicator_field(mesh, {{{0.2, 0.5}, 0.1}}, 0.15), ParamError);
  }

  SUBCASE("overlapping inclusions are rejected") {
    CHECK_THROWS_AS(
        indicator_field(mesh, {{{0.4, 0.5}, 0.1}, {{0.5, 0.5}, 0.1}}, 0.1), ParamError);
  }
}

TEST_CASE("forward solve: rest state stays exactly at rest") {
  const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 10, 10);
  const TensorField k0 = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
  const NodalField zero = NodalField::Zero(mesh.node_count());
  const StateTrajectory traj =
      solve_forward(mesh, k0, nullptr, nullptr, IonicParams{}, zero, zero, 0.05, 1.0);
  for (int m = 0; m <= traj.steps(); ++m) {
    CHECK(traj.u(m).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(traj.w(m).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("forward solve: all-zero indicator matches the unperturbed path bitwise") {
  const Mesh mesh = make_rect_mesh({0, 0}, {2, 2}, 12, 12);
  const TensorField k0 = TensorField::constant(mesh.triangle_count(), 0.5 * Eigen::Matrix2d::Identity());
  const TensorField k1 = TensorField::constant(mesh.triangle_count(), 0.1 * Eigen::Matrix2d::Identity());
  StimulusSpec s;
  s.center = Vec2(1.0, 1.0);
  s.radius = 0.4;
  const auto [u0, w0] = initial_stimulus(mesh, s);
  const std::vector<double> zeros(size_t(mesh.triangle_count()), 0.0);

  const StateTrajectory a =
      solve_forward(mesh, k0, nullptr, nullptr, IonicParams{}, u0, w0, 0.05, 0.5);
  const StateTrajectory b =
      solve_forward(mesh, k0, &k1, &zeros, IonicParams{}, u0, w0, 0.05, 0.5);
  for (int m = 0; m <= a.steps(); ++m) {
    CHECK((a.u(m) - b.u(m)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.w(m) - b.w(m)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("forward solve: propagating front stays in the monitoring box") {
  const Mesh mesh = generate_ventricle_section(VentricleGeometry{}, 0.2);
  const TensorField k0 = TensorField::constant(mesh.triangle_count(), 1.2 * Eigen::Matrix2d::Identity());
  const IonicParams params;
  const auto [u0, w0] = initial_stimulus(mesh, StimulusSpec{});
  const StateTrajectory traj =
      solve_forward(mesh, k0, nullptr, nullptr, params, u0, w0, 0.05, 6.0);

  CHECK(traj.metadata().box_warnings.empty());
  double u_max = 0.0, u_min = 0.0, w_max = 0.0;
  for (int m = 0; m <= traj.steps(); ++m) {
    u_max = std::max(u_max, traj.u(m).maxCoeff());
    u_min = std::min(u_min, traj.u(m).minCoeff());
    w_max = std::max(w_max, traj.w(m).maxCoeff());
  }
  CHECK(u_max >= 0.95);
  CHECK(u_max <= 1.02);
  CHECK(u_min >= -0.02);
  CHECK(w_max <= params.w_max() + 0.02);

  SUBCASE("Newton increments show a quadratic tail") {
    int checked = 0;
    for (const auto& steps : traj.metadata().newton_increments) {
      if (steps.size() < 2) continue;
      const double prev = steps[steps.size() - 2];
      const double last = steps.back();
      if (prev > 1e-8) {
        CHECK(last <= 100.0 * prev * prev + 1e-12);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("forward solve: first-order convergence in dt") {
  const Mesh mesh = make_rect_mesh({0, 0}, {2, 2}, 24, 24);
  const TensorField k0 = TensorField::constant(mesh.triangle_count(), 0.5 * Eigen::Matrix2d::Identity());
  StimulusSpec s;
  s.center = Vec2(1.0, 1.0);
  s.radius = 0.4;
  const auto [u0, w0] = initial_stimulus(mesh, s);
  const double T = 2.0;

  auto final_u = [&, u0 = u0, w0 = w0](double dt) {
    const StateTrajectory traj =
        solve_forward(mesh, k0, nullptr, nullptr, IonicParams{}, u0, w0, dt, T);
    return traj.u(traj.steps());
  };
  const NodalField u1 = final_u(0.1);
  const NodalField u2 = final_u(0.05);
  const NodalField u3 = final_u(0.025);
  const double e1 = (u1 - u2).norm();
  const double e2 = (u2 - u3).norm();
  const double order = std::log2(e1 / e2);
  CHECK(order >= 0.8);
}

TEST_CASE("forward solve: smaller inclusions perturb less") {
  const Mesh mesh = generate_ventricle_section(VentricleGeometry{}, 0.2);
  const FiberLaplaceResult laplace = solve_fiber_laplace(mesh);
  const FiberField fibers = fibers_from_potential(mesh, laplace.phi);
  const TensorField k0 = build_conductivity(fibers, 1.200, 0.2538);
  const TensorField k1 = build_conductivity(fibers, 0.2308, 0.0062);
  const auto [u0, w0] = initial_stimulus(mesh, StimulusSpec{});
  const double dt = 0.1, T = 30.0;
  const Vec2 z(1.2, 0.0);

  const StateTrajectory base =
      solve_forward(mesh, k0, nullptr, nullptr, IonicParams{}, u0, w0, dt, T);

  auto l2qt_diff = [&, u0 = u0, w0 = w0](double radius) {
    const IndicatorField ind = indicator_field(mesh, {{z, radius}}, 0.05);
    const StateTrajectory pert =
        solve_forward(mesh, k0, &k1, &ind.element_values, IonicParams{}, u0, w0, dt, T);
    double acc = 0.0;
    for (int m = 0; m <= base.steps(); ++m) {
      const double wgt = (m == 0 || m == base.steps()) ? 0.5 : 1.0;
      acc += wgt * dt * (pert.u(m) - base.u(m)).squaredNorm();
    }
    return std::sqrt(acc);
  };

  const double big = l2qt_diff(0.4);
  const double small = l2qt_diff(0.2);
  CHECK(small < big);
  CHECK(big > 0.0);
}

TEST_CASE("boundary traces") {
  const Mesh mesh = make_rect_mesh({0, 0}, {1, 1}, 8, 8);
  const TensorField k0 = TensorField::constant(mesh.triangle_count(), Eigen::Matrix2d::Identity());
  const NodalField zero = NodalField::Zero(mesh.node_count());
  const StateTrajectory traj =
      solve_forward(mesh, k0, nullptr, nullptr, IonicParams{}, zero, zero, 0.1, 0.5);

  const TraceSeries trace = boundary_trace(traj, mesh, {BoundaryRegion::EPI});
  CHECK(trace.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(trace.node_ids == mesh.region_nodes({BoundaryRegion::EPI}));
  CHECK(int(trace.times.size()) == traj.steps() + 1);

  SUBCASE("restriction of a full-boundary trace matches direct extraction") {
    const Mesh vent = generate_ventricle_section(VentricleGeometry{}, 0.25);
    const TensorField k = TensorField::constant(vent.triangle_count(), Eigen::Matrix2d::Identity());
    const auto [u0, w0] = initial_stimulus(vent, StimulusSpec{});
    const StateTrajectory vt = solve_forward(vent, k, nullptr, nullptr, IonicParams{}, u0, w0, 0.1, 0.5);
    const TraceSeries full = boundary_trace(vt, vent, RegionSet::all());
    const TraceSeries epi = boundary_trace(vt, vent, {BoundaryRegion::EPI});
    for (size_t j = 0; j < epi.node_ids.size(); ++j) {
      const auto it = std::find(full.node_ids.begin(), full.node_ids.end(), epi.node_ids[j]);
      REQUIRE(it != full.node_ids.end());
      const int col = int(it - full.node_ids.begin());
      for (size_t t = 0; t < epi.times.size(); ++t) {
        CHECK(full.values(int(t), col) == epi.values(int(t), int(j)));
      }
    }
  }
}
