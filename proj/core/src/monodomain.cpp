#include "ischem/monodomain.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace ischem {

void IonicParams::check() const {
  if (!(excitation > 0)) throw ParamError("excitation strength A must be positive");
  if (!(threshold > 0 && threshold < 1)) throw ParamError("threshold a must lie in (0,1)");
  if (!(recovery_rate > 0)) throw ParamError("recovery rate eps must be positive");
}

ReactionTerms reaction_eval(double u, double w, const IonicParams& p) {
  const double A = p.excitation, a = p.threshold, eps = p.recovery_rate;
  ReactionTerms r;
  r.f = A * u * (u - a) * (u - 1.0) + u * w;
  r.g = eps * (A * u * (u - 1.0 - a) + w);
  r.df_du = A * (3.0 * u * u - 2.0 * (1.0 + a) * u + a) + w;
  r.df_dw = u;
  r.dg_du = eps * A * (2.0 * u - 1.0 - a);
  r.dg_dw = eps;
  return r;
}

std::pair<NodalField, NodalField> initial_stimulus(const Mesh& mesh, const StimulusSpec& s) {
  if (!(s.amplitude > 0.0 && s.amplitude <= 1.0)) {
    throw ParamError("stimulus amplitude must lie in (0,1] to keep the state inside S");
  }
  if (!(s.radius > 0.0)) throw ParamError("stimulus radius must be positive");
  if (!mesh.contains(s.center) || mesh.distance_to_boundary(s.center) < s.radius) {
    throw ParamError("stimulus disk must lie inside the domain");
  }
  NodalField u0 = NodalField::Zero(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i) {
    const double d = (mesh.node(i) - s.center).norm();
    if (d >= s.radius) continue;
    const double c = 0.5 * (1.0 + std::cos(M_PI * d / s.radius));
    u0[i] = s.amplitude * c * c;  // C2 profile, peak = amplitude
  }
  return {u0, NodalField::Zero(mesh.node_count())};
}

IndicatorField indicator_field(const Mesh& mesh, const std::vector<Inclusion>& inclusions,
                               double separation_d0) {
  for (size_t i = 0; i < inclusions.size(); ++i) {
    const auto& inc = inclusions[i];
    if (!(inc.radius > 0)) throw ParamError("inclusion radius must be positive");
    if (!mesh.contains(inc.center)) {
      throw ParamError("inclusion " + std::to_string(i) + " is centered outside the domain");
    }
    if (mesh.distance_to_boundary(inc.center) < separation_d0 + inc.radius) {
      throw ParamError("inclusion " + std::to_string(i) +
                       " violates the boundary separation d0 + r");
    }
    for (size_t j = i + 1; j < inclusions.size(); ++j) {
      if ((inc.center - inclusions[j].center).norm() <= inc.radius + inclusions[j].radius) {
        throw ParamError("inclusions " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
  IndicatorField out;
  out.element_values.assign(size_t(mesh.triangle_count()), 0.0);
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const Vec2 c = mesh.centroid(e);
    for (const auto& inc : inclusions) {
      if ((c - inc.center).norm() <= inc.radius) {
        out.element_values[size_t(e)] = 1.0;
        out.area += mesh.triangle_area(e);
        break;
      }
    }
  }
  return out;
}

StateTrajectory::StateTrajectory(std::vector<NodalField> u, std::vector<NodalField> w, double dt,
                                 TrajectoryMetadata meta)
    : u_(std::move(u)), w_(std::move(w)), dt_(dt), meta_(std::move(meta)) {
  if (u_.size() != w_.size() || u_.empty()) throw ParamError("inconsistent trajectory arrays");
}

namespace {

int step_count(double dt, double T) {
  if (!(dt > 0) || !(T > 0)) throw ParamError("time step and horizon must be positive");
  const int n = int(std::lround(T / dt));
  if (n < 1 || std::abs(n * dt - T) > 1e-9 * std::max(1.0, T)) {
    throw ParamError("horizon T must be an integer multiple of dt");
  }
  return n;
}

}  // namespace

TrajectoryMetadata solve_forward_streaming(const Mesh& mesh, const TensorField& healthy,
                                           const TensorField* ischemic,
                                           const std::vector<double>* indicator,
                                           const IonicParams& params, const NodalField& u0,
                                           const NodalField& w0, double dt, double T,
                                           const NewtonOptions& newton, const StepCallback& on_step) {
  params.check();
  const int n = mesh.node_count();
  if (u0.size() != n || w0.size() != n) throw ParamError("initial state size mismatch");
  if ((ischemic == nullptr) != (indicator == nullptr)) {
    throw ParamError("perturbed solves need both the ischemic tensor and the indicator");
  }
  if (indicator && int(indicator->size()) != mesh.triangle_count()) {
    throw ParamError("indicator size does not match element count");
  }
  const double wmax = params.w_max();
  for (int i = 0; i < n; ++i) {
    if (!(u0[i] >= 0.0 && u0[i] <= 1.0 && w0[i] >= 0.0 && w0[i] <= wmax)) {
      throw ParamError("initial state leaves the invariant rectangle S at node " + std::to_string(i));
    }
  }
  const int steps = step_count(dt, T);

  // Effective conductivity: K1 on marked elements, K0 elsewhere.
  const TensorField* conductivity = &healthy;
  TensorField mixed;
  const bool perturbed = indicator && std::any_of(indicator->begin(), indicator->end(),
                                                  [](double x) { return x != 0.0; });
  if (perturbed) {
    std::vector<Eigen::Matrix2d> k(size_t(mesh.triangle_count()));
    for (int e = 0; e < mesh.triangle_count(); ++e) {
      k[size_t(e)] = ((*indicator)[size_t(e)] != 0.0) ? ischemic->at(e) : healthy.at(e);
    }
    mixed = TensorField(std::move(k));
    conductivity = &mixed;
  }
  const SparseMatrix stiffness = assemble_stiffness(mesh, *conductivity);
  const NodalField lumped = assemble_mass(mesh, true).eigen().diagonal();

  // Reaction suppression factor 1 - chi at nodes (plain average of the
  // adjacent element indicators).
  NodalField suppress = NodalField::Ones(n);
  if (perturbed) {
    for (int i = 0; i < n; ++i) {
      const auto& tris = mesh.node_to_triangles()[size_t(i)];
      double chi = 0.0;
      for (int e : tris) chi += (*indicator)[size_t(e)];
      suppress[i] = 1.0 - (tris.empty() ? 0.0 : chi / double(tris.size()));
    }
  }

  // Newton system: J = M_L/dt + A + diag(m_i c_i d_i); the pattern is fixed,
  // only the diagonal changes between iterations.
  Eigen::SparseMatrix<double> J = stiffness.eigen();
  std::vector<double*> diag_ptr(size_t(n), nullptr);
  for (int col = 0; col < J.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(J, col); it; ++it) {
      if (it.row() == it.col()) diag_ptr[size_t(it.col())] = &it.valueRef();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!diag_ptr[size_t(i)]) throw SolverError("stiffness diagonal entry missing");
  }
  const NodalField stiff_diag = stiffness.eigen().diagonal();

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.analyzePattern(J);

  TrajectoryMetadata meta;
  meta.params = params;
  meta.dt = dt;
  meta.perturbed = perturbed;
  meta.newton_increments.reserve(size_t(steps));

  const double A_exc = params.excitation, a_thr = params.threshold, eps = params.recovery_rate;
  const double wdenom = 1.0 + dt * eps;
  auto w_implicit = [&](double u, double w_prev) {
    return (w_prev - dt * eps * A_exc * u * (u - 1.0 - a_thr)) / wdenom;
  };

  NodalField u = u0, w = w0;
  on_step(0, 0.0, u, w);

  NodalField residual(n), delta(n), u_new(n);
  for (int step = 1; step <= steps; ++step) {
    const NodalField& u_prev = u;
    const NodalField& w_prev = w;
    u_new = u_prev;
    std::vector<double> increments;

    bool converged = false;
    for (int it = 0; it < newton.max_iterations; ++it) {
      // Residual of the u-equation with w eliminated.
      residual = stiffness.eigen() * u_new;
      double scale = 0.0;
      for (int i = 0; i < n; ++i) {
        const double wi = w_implicit(u_new[i], w_prev[i]);
        const auto r = reaction_eval(u_new[i], wi, params);
        residual[i] += lumped[i] * ((u_new[i] - u_prev[i]) / dt + suppress[i] * r.f);
        scale = std::max(scale, lumped[i] / dt);
      }
      if (it == 0 && residual.cwiseAbs().maxCoeff() <= 1e-14 * scale) {
        converged = true;  // exact fixed point (e.g. the rest state)
        break;
      }
      for (int i = 0; i < n; ++i) {
        const double wi = w_implicit(u_new[i], w_prev[i]);
        const auto r = reaction_eval(u_new[i], wi, params);
        const double dw_du = -dt * r.dg_du / wdenom;
        *diag_ptr[size_t(i)] = stiff_diag[i] + lumped[i] / dt +
                               lumped[i] * suppress[i] * (r.df_du + r.df_dw * dw_du);
      }
      ldlt.factorize(J);
      if (ldlt.info() != Eigen::Success) {
        throw SolverError("Newton matrix factorization failed at step " + std::to_string(step));
      }
      delta = ldlt.solve(-residual);
      u_new += delta;
      const double dn = delta.cwiseAbs().maxCoeff();
      increments.push_back(dn);
      if (dn <= newton.tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw SolverError("Newton did not converge at step " + std::to_string(step) + " (t=" +
                        std::to_string(step * dt) + "), last increment " +
                        std::to_string(increments.empty() ? 0.0 : increments.back()));
    }

    u = u_new;
    for (int i = 0; i < n; ++i) w[i] = w_implicit(u[i], w_prev[i]);
    meta.newton_increments.push_back(std::move(increments));

    const double u_min = u.minCoeff(), u_max = u.maxCoeff();
    const double w_min = w.minCoeff(), w_max_now = w.maxCoeff();
    if (u_min < -0.02 || u_max > 1.02 || w_min < -0.02 || w_max_now > wmax + 0.02) {
      meta.box_warnings.push_back({step, u_min, u_max, w_min, w_max_now});
    }
    on_step(step, step * dt, u, w);
  }
  return meta;
}

StateTrajectory solve_forward(const Mesh& mesh, const TensorField& healthy,
                              const TensorField* ischemic, const std::vector<double>* indicator,
                              const IonicParams& params, const NodalField& u0, const NodalField& w0,
                              double dt, double T, const NewtonOptions& newton) {
  std::vector<NodalField> us, ws;
  us.reserve(size_t(step_count(dt, T)) + 1);
  ws.reserve(us.capacity());
  TrajectoryMetadata meta = solve_forward_streaming(
      mesh, healthy, ischemic, indicator, params, u0, w0, dt, T, newton,
      [&](int, double, const NodalField& u, const NodalField& w) {
        us.push_back(u);
        ws.push_back(w);
      });
  return StateTrajectory(std::move(us), std::move(ws), dt, std::move(meta));
}

TraceSeries boundary_trace(const StateTrajectory& trajectory, const Mesh& mesh, RegionSet regions) {
  if (regions.empty()) throw ParamError("boundary trace needs a nonempty region set");
  if (trajectory.u(0).size() != mesh.node_count()) {
    throw ParamError("trajectory does not match the mesh");
  }
  TraceSeries out;
  out.node_ids = mesh.region_nodes(regions);
  if (out.node_ids.empty()) throw ParamError("selected regions have no boundary nodes");
  out.coords.reserve(out.node_ids.size());
  for (int id : out.node_ids) out.coords.push_back(mesh.node(id));
  const int nt = trajectory.steps() + 1;
  out.times.resize(size_t(nt));
  out.values.resize(nt, int(out.node_ids.size()));
  for (int t = 0; t < nt; ++t) {
    out.times[size_t(t)] = trajectory.time(t);
    const NodalField& u = trajectory.u(t);
    for (size_t j = 0; j < out.node_ids.size(); ++j) {
      out.values(t, int(j)) = u[out.node_ids[j]];
    }
  }
  return out;
}

}  // namespace ischem
