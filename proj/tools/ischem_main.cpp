// Command-line driver for the ischemic-inclusion localization pipeline:
// mesh generation, fiber fields, monodomain solves, synthetic measurements,
// noise injection, topological-gradient reconstruction and rate studies.

#include <CLI11.hpp>

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "ischem/harness.hpp"

namespace fs = std::filesystem;
using namespace ischem;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

ExperimentConfig effective_config(const GlobalArgs& g) {
  if (g.config_path.empty()) throw ConfigError("--config is required for this subcommand");
  ExperimentConfig cfg = load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  return cfg;
}

fs::path out_dir_of(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

void print_minima(const ReconstructionReport& report) {
  std::printf("J = %.6g (null-experiment floor %.6g)\n", report.J, report.floor.J);
  std::printf("gradient floor (null experiment) = %.6g\n", report.floor.gradient_sup);
  int rank = 1;
  for (const auto& m : report.minima) {
    std::printf("minimum %d: node %d at (%.4f, %.4f), G = %.6g%s\n", rank++, m.minimum.node,
                m.minimum.position.x(), m.minimum.position.y(), m.minimum.value,
                m.low_confidence ? "  [LOW-CONFIDENCE]" : "");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection of small ischemic inclusions from boundary voltage measurements"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "Experiment config file (INI-style key = value)");
  app.add_option("--out", g.out_dir, "Output directory (overrides the config)");
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads for independent runs")
      ->check(CLI::PositiveNumber);

  // mesh
  auto* cmd_mesh = app.add_subcommand("mesh", "Generate (or validate) the ventricle mesh");
  std::string mesh_grid = "coarse";
  std::string validate_path;
  cmd_mesh->add_option("--grid", mesh_grid, "coarse|fine")->check(CLI::IsMember({"coarse", "fine"}));
  cmd_mesh->add_option("--validate", validate_path, "Validate an existing mesh file and exit");

  // fibers
  auto* cmd_fibers = app.add_subcommand("fibers", "Solve the fiber Laplace problem and export fields");

  // forward
  auto* cmd_forward = app.add_subcommand("forward", "Run a monodomain forward solve");
  std::string fwd_grid = "coarse";
  bool fwd_perturbed = false;
  int vtk_every = 0;
  cmd_forward->add_option("--grid", fwd_grid, "coarse|fine")->check(CLI::IsMember({"coarse", "fine"}));
  cmd_forward->add_flag("--perturbed", fwd_perturbed, "Include the configured inclusions");
  cmd_forward->add_option("--vtk-every", vtk_every, "Write a VTK snapshot every N steps");

  // synth
  auto* cmd_synth = app.add_subcommand("synth", "Generate synthetic boundary measurements");
  bool save_fine_trace = false;
  cmd_synth->add_flag("--save-fine-trace", save_fine_trace, "Also write the raw fine-grid trace");

  // noise
  auto* cmd_noise = app.add_subcommand("noise", "Add Gaussian noise to a trace file");
  std::string noise_input;
  std::optional<double> noise_rho;
  cmd_noise->add_option("--input", noise_input, "Trace CSV to perturb")->required();
  cmd_noise->add_option("--rho", noise_rho, "Noise level (overrides the config)");

  // reconstruct
  auto* cmd_rec = app.add_subcommand("reconstruct", "Localize inclusions from a measurement file");
  std::string measurement_path;
  cmd_rec->add_option("--measurement", measurement_path, "Measurement CSV from synth")->required();

  // rates
  auto* cmd_rates = app.add_subcommand("rates", "Energy-rate and expansion-ratio study");
  std::string radii_arg = "0.3,0.2,0.15,0.1";
  cmd_rates->add_option("--radii", radii_arg, "Comma-separated decreasing radii (cm)");

  CLI11_PARSE(app, argc, argv);

  try {
    Eigen::setNbThreads(g.threads);

    if (cmd_mesh->parsed()) {
      if (!validate_path.empty()) {
        const Mesh mesh = load_mesh(validate_path);
        const auto issues = validate(mesh);
        if (issues.empty()) {
          std::printf("%s: valid (%d nodes, %d triangles)\n", validate_path.c_str(),
                      mesh.node_count(), mesh.triangle_count());
          return 0;
        }
        for (const auto& issue : issues) std::printf("violation: %s\n", issue.message.c_str());
        return 1;
      }
      const ExperimentConfig cfg = effective_config(g);
      const fs::path dir = out_dir_of(cfg);
      const bool fine = mesh_grid == "fine";
      const double h = fine ? cfg.h_fine : cfg.h_coarse;
      const auto refinement = fine ? inclusion_refinement(cfg.inclusions, cfg.h_fine)
                                   : std::vector<RefinementDisk>{};
      const Mesh mesh = generate_ventricle_section(cfg.geometry, h, refinement);
      const fs::path path = dir / (mesh_grid + "_mesh.txt");
      save_mesh(mesh, path);
      std::printf("wrote %s (%d nodes, %d triangles, %zu boundary edges, area %.6f)\n",
                  path.c_str(), mesh.node_count(), mesh.triangle_count(),
                  mesh.boundary_edges().size(), mesh.total_area());
      return 0;
    }

    if (cmd_fibers->parsed()) {
      const ExperimentConfig cfg = effective_config(g);
      const fs::path dir = out_dir_of(cfg);
      const Mesh mesh = generate_ventricle_section(cfg.geometry, cfg.h_coarse);
      const FiberLaplaceResult laplace = solve_fiber_laplace(mesh);
      if (laplace.clamped_nodes > 0) {
        std::fprintf(stderr, "warning: clamped %d nodes (max violation %.3g)\n",
                     laplace.clamped_nodes, laplace.max_violation);
      }
      const FiberField fibers = fibers_from_potential(mesh, laplace.phi);
      write_vtk_fields(mesh, {{"phi", &laplace.phi}}, dir / "fibers.vtk");
      std::ostringstream csv;
      csv << "element,ef_x,ef_y,en_x,en_y\n";
      for (int e = 0; e < fibers.size(); ++e) {
        csv << e << ',' << format_full(fibers.fiber(e).x()) << ',' << format_full(fibers.fiber(e).y())
            << ',' << format_full(fibers.transmural(e).x()) << ','
            << format_full(fibers.transmural(e).y()) << "\n";
      }
      atomic_write_text(dir / "fibers.csv", csv.str());
      std::printf("wrote %s and %s\n", (dir / "fibers.vtk").c_str(), (dir / "fibers.csv").c_str());
      return 0;
    }

    if (cmd_forward->parsed()) {
      const ExperimentConfig cfg = effective_config(g);
      const fs::path dir = out_dir_of(cfg);
      const bool fine = fwd_grid == "fine";
      const double h = fine ? cfg.h_fine : cfg.h_coarse;
      const double dt = fine ? cfg.dt_fine : cfg.dt_coarse;
      const auto refinement = (fine && fwd_perturbed)
                                  ? inclusion_refinement(cfg.inclusions, cfg.h_fine)
                                  : std::vector<RefinementDisk>{};
      const ModelContext model = build_model(cfg, h, refinement);
      IndicatorField indicator;
      const TensorField* k1 = nullptr;
      const std::vector<double>* chi = nullptr;
      if (fwd_perturbed && !cfg.inclusions.empty()) {
        indicator = indicator_field(model.mesh, cfg.inclusions, cfg.mask_d0);
        k1 = &model.ischemic;
        chi = &indicator.element_values;
      }
      const auto [u0, w0] = initial_stimulus(model.mesh, cfg.stimulus);
      const StateTrajectory traj =
          solve_forward(model.mesh, model.healthy, k1, chi, cfg.ionic, u0, w0, dt, cfg.horizon);
      for (const auto& warning : traj.metadata().box_warnings) {
        std::fprintf(stderr, "warning: state left the monitoring box at step %d\n", warning.step);
      }
      const TraceSeries trace = boundary_trace(traj, model.mesh, cfg.measurement);
      write_trace_csv(trace, dir / "forward_trace.csv");
      write_provenance(dir / "forward_trace.csv",
                       {config_hash(cfg), cfg.seed, 0.0, "forward-trace"});
      write_trajectory(traj, dir / "forward.traj");
      if (vtk_every > 0) {
        for (int m = 0; m <= traj.steps(); m += vtk_every) {
          char name[64];
          std::snprintf(name, sizeof name, "state_%06d.vtk", m);
          write_vtk_fields(model.mesh, {{"u", &traj.u(m)}, {"w", &traj.w(m)}}, dir / name);
        }
      }
      std::printf("wrote %s and %s (%d steps)\n", (dir / "forward_trace.csv").c_str(),
                  (dir / "forward.traj").c_str(), traj.steps());
      return 0;
    }

    if (cmd_synth->parsed()) {
      const ExperimentConfig cfg = effective_config(g);
      const SynthResult result = generate_synthetic(cfg, out_dir_of(cfg), {save_fine_trace});
      std::printf("wrote %s\n", result.measurement.c_str());
      if (!result.fine_trace.empty()) std::printf("wrote %s\n", result.fine_trace.c_str());
      return 0;
    }

    if (cmd_noise->parsed()) {
      const ExperimentConfig cfg = effective_config(g);
      const fs::path dir = out_dir_of(cfg);
      const double rho = noise_rho.value_or(cfg.noise_level);
      const Provenance prov = read_provenance(noise_input);
      if (prov.config_hash != config_hash(cfg)) {
        throw ConfigError("trace '" + noise_input + "' comes from a different config");
      }
      const TraceSeries noisy = add_noise(read_trace_csv(noise_input), rho, cfg.seed);
      const fs::path out = dir / ("noisy_" + fs::path(noise_input).filename().string());
      write_trace_csv(noisy, out);
      write_provenance(out, {config_hash(cfg), cfg.seed, rho, prov.kind});
      std::printf("wrote %s (rho = %g, seed = %llu)\n", out.c_str(), rho,
                  static_cast<unsigned long long>(cfg.seed));
      return 0;
    }

    if (cmd_rec->parsed()) {
      const ExperimentConfig cfg = effective_config(g);
      const ReconstructionReport report =
          run_reconstruction(cfg, measurement_path, out_dir_of(cfg));
      print_minima(report);
      std::printf("wrote %s\n", report.manifest_path.c_str());
      return 0;
    }

    if (cmd_rates->parsed()) {
      const ExperimentConfig cfg = effective_config(g);
      std::vector<double> radii;
      std::stringstream ss(radii_arg);
      std::string item;
      while (std::getline(ss, item, ',')) radii.push_back(std::stod(item));
      const RateReport report = rate_study(cfg, radii, out_dir_of(cfg), g.threads);
      std::printf("slopes: L2(QT) %.3f, Linf(L2) %.3f, L2(H1) %.3f\n", report.slope_l2_qt,
                  report.slope_linf_l2, report.slope_l2_h1);
      for (const auto& row : report.rows) {
        std::printf("r = %.3f: |omega_h| = %.5f, expansion ratio = %.3f\n", row.radius, row.area,
                    row.expansion_ratio);
      }
      std::printf("wrote %s\n", report.csv.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
