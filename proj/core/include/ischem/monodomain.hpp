#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ischem/fem.hpp"

namespace ischem {

/// Two-variable phenomenological ionic model
///   f(u,w) = A u (u-a)(u-1) + u w
///   g(u,w) = eps (A u (u-1-a) + w)
/// with excitation strength A, threshold a and recovery rate eps.
struct IonicParams {
  double excitation = 8.0;     // A
  double threshold = 0.15;     // a, in (0,1)
  double recovery_rate = 0.05; // eps

  void check() const;
  /// Top of the invariant rectangle S = [0,1] x [0, A(a+1)^2/4].
  double w_max() const { return excitation * (1.0 + threshold) * (1.0 + threshold) / 4.0; }
};

struct ReactionTerms {
  double f, g;
  double df_du, df_dw, dg_du, dg_dw;
};
ReactionTerms reaction_eval(double u, double w, const IonicParams& params);

/// Disk-shaped ischemic region.
struct Inclusion {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;  // cm
};

struct StimulusSpec {
  Vec2 center{-2.65, 0.0};
  double radius = 0.3;     // cm
  double amplitude = 1.0;  // peak of u0, in (0,1]
};

/// C2 cosine bump for u0 (w0 = 0). The stimulus disk must lie inside the
/// domain and the amplitude inside (0,1] so the initial state stays in S.
std::pair<NodalField, NodalField> initial_stimulus(const Mesh& mesh, const StimulusSpec& stimulus);

struct IndicatorField {
  std::vector<double> element_values;  // 1 on elements whose centroid lies in an inclusion
  double area = 0.0;                   // |omega_h|, the marked area
};

/// Element-wise indicator of the inclusion set. Inclusions must be pairwise
/// disjoint and separated from the boundary by at least d0 + radius.
IndicatorField indicator_field(const Mesh& mesh, const std::vector<Inclusion>& inclusions,
                               double separation_d0);

struct NewtonOptions {
  double tol = 1e-10;       // max-norm of the Newton increment
  int max_iterations = 20;
};

/// Step at which the state left the inflated monitoring box, with extents.
struct BoxExitWarning {
  int step;
  double u_min, u_max, w_min, w_max;
};

struct TrajectoryMetadata {
  IonicParams params;
  double dt = 0.0;
  bool perturbed = false;
  std::vector<BoxExitWarning> box_warnings;
  std::vector<std::vector<double>> newton_increments;  // per step, per iteration
};

/// Time-indexed nodal states (u, w) on a uniform grid t_n = n dt, n = 0..N.
class StateTrajectory {
 public:
  StateTrajectory(std::vector<NodalField> u, std::vector<NodalField> w, double dt,
                  TrajectoryMetadata meta);

  int steps() const { return static_cast<int>(u_.size()) - 1; }  // N
  double dt() const { return dt_; }
  double time(int n) const { return n * dt_; }
  const NodalField& u(int n) const { return u_[size_t(n)]; }
  const NodalField& w(int n) const { return w_[size_t(n)]; }
  const TrajectoryMetadata& metadata() const { return meta_; }

 private:
  std::vector<NodalField> u_, w_;
  double dt_;
  TrajectoryMetadata meta_;
};

using StepCallback = std::function<void(int step, double t, const NodalField& u, const NodalField& w)>;

/// Implicit-Euler / Newton solve of the monodomain system. Pass K1 and the
/// element indicator to solve the perturbed problem; both null solves the
/// unperturbed one. The recovery variable is eliminated nodewise inside
/// Newton (its update is linear in w). Homogeneous Neumann boundary.
StateTrajectory solve_forward(const Mesh& mesh, const TensorField& healthy_conductivity,
                              const TensorField* ischemic_conductivity,
                              const std::vector<double>* indicator, const IonicParams& params,
                              const NodalField& u0, const NodalField& w0, double dt, double T,
                              const NewtonOptions& newton = {});

/// Same solve, but states are handed to the callback step by step (including
/// step 0) instead of stored; use for fine discretizations.
TrajectoryMetadata solve_forward_streaming(const Mesh& mesh, const TensorField& healthy_conductivity,
                                           const TensorField* ischemic_conductivity,
                                           const std::vector<double>* indicator,
                                           const IonicParams& params, const NodalField& u0,
                                           const NodalField& w0, double dt, double T,
                                           const NewtonOptions& newton, const StepCallback& on_step);

/// Boundary values of u over time on the nodes of the selected regions.
struct TraceSeries {
  std::vector<int> node_ids;
  std::vector<Vec2> coords;
  std::vector<double> times;
  Eigen::MatrixXd values;  // times x nodes
};

TraceSeries boundary_trace(const StateTrajectory& trajectory, const Mesh& mesh, RegionSet regions);

}  // namespace ischem
