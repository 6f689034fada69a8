#include <CLI11.hpp>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <ostream>

#include "stfv/csv.hpp"
#include "stfv/errors.hpp"
#include "stfv/experiments.hpp"

namespace stfv {

namespace {

struct Flags {
  std::string scenario;
  std::optional<int> levels;
  std::optional<int> cells;
  std::optional<double> cfl;
  std::optional<std::string> scheme;
  std::optional<double> T;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> initial;
  std::optional<double> lf_lambda_scale;
  std::optional<double> motion_amplitude;
  std::optional<int> flux_samples;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--scenario", f.scenario, "scenario id");
  sub->add_option("--levels", f.levels, "refinement levels")->check(CLI::Range(2, 12));
  sub->add_option("--cells", f.cells, "cells per axis")->check(CLI::PositiveNumber);
  sub->add_option("--cfl", f.cfl, "CFL fraction in (0, 1)");
  sub->add_option("--scheme", f.scheme, "lax-friedrichs | godunov");
  sub->add_option("--T", f.T, "final time");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--config", f.config, "INI configuration file");
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--initial", f.initial, "initial data id");
  sub->add_option("--lf-lambda-scale", f.lf_lambda_scale, "Lax-Friedrichs dissipation factor");
  sub->add_option("--motion-amplitude", f.motion_amplitude, "mesh motion amplitude");
  sub->add_option("--flux-samples", f.flux_samples, "flux certification samples per face");
}

// defaults < config file < flags; the output directory also honours STFV_OUTPUT_DIR, which
// sits between the flag and the config file.
ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig c;
  std::optional<std::filesystem::path> config_out;
  if (f.config) {
    c = load_config(*f.config, c);
    if (c.out_dir != ExperimentConfig{}.out_dir) config_out = c.out_dir;
  }
  if (!f.scenario.empty()) c.scenario = f.scenario;
  if (c.scenario.empty()) {
    std::string list;
    for (const auto& id : scenario_registry()) list += (list.empty() ? "" : ", ") + id;
    throw ConfigError("no scenario given (use --scenario or scenario.id); available: " + list);
  }
  if (f.levels) c.levels = *f.levels;
  if (f.cells) c.params.cells = *f.cells;
  if (f.cfl) c.params.cfl = *f.cfl;
  if (f.scheme) c.scheme = parse_scheme_kind(*f.scheme);
  if (f.T) c.params.T = *f.T;
  if (f.seed) c.seed = *f.seed;
  if (f.initial) c.params.initial = *f.initial;
  if (f.lf_lambda_scale) c.scheme_options.lf_lambda_scale = *f.lf_lambda_scale;
  if (f.motion_amplitude) c.params.motion_amplitude = *f.motion_amplitude;
  if (f.flux_samples) c.flux_samples = *f.flux_samples;
  c.params.seed = c.seed;

  const char* env = std::getenv("STFV_OUTPUT_DIR");
  if (f.out) {
    c.out_dir = *f.out;
  } else if (env != nullptr && *env != '\0') {
    c.out_dir = env;
  } else if (config_out) {
    c.out_dir = *config_out;
  }
  return c;
}

Scenario scenario_of(const ExperimentConfig& c) {
  ScenarioParams p = c.params;
  p.seed = c.seed;
  return make_scenario(c.scenario, p);
}

int cmd_run(const ExperimentConfig& c, std::ostream& out) {
  const Scenario s = scenario_of(c);
  const TotalFluxScheme scheme(c.scheme_for(s), s.flux->u_range(), c.scheme_options);
  const auto mesh = s.build_mesh();
  const PreflightReport pre = preflight(*mesh, scheme, c.flux_samples, c.seed);
  out << pre.summary();
  if (!pre.mesh_ok() || !pre.flux_ok()) {
    out << "preflight failed; not running\n";
    return 2;
  }
  const InitialCondition ic = s.initial();
  const Trajectory traj = run(mesh, scheme, ic.u0);
  write_file_atomically(c.out_dir / "trajectory.csv",
                        [&](std::ostream& o) { write_trajectory_csv(traj, o); });
  const int N = mesh->num_slabs();
  out << std::setprecision(12) << s.id << " (" << ic.id << ", " << to_string(c.scheme_for(s))
      << "): " << mesh->num_cells() << " cells, " << N << " slabs, T = " << mesh->slice_times().back()
      << "\n";
  out << "total: initial " << slice_total(*mesh, 0, traj.states().front().u) << ", final "
      << slice_total(*mesh, N, traj.states().back().u) << "\n";
  if (ic.oracle) out << "L1 error vs exact: " << l1_error(*mesh, N, traj.states().back().u, *ic.oracle) << "\n";
  for (const auto& w : traj.warnings()) out << "warning: " << w << "\n";
  out << "wrote " << (c.out_dir / "trajectory.csv").string() << "\n";
  return 0;
}

int cmd_converge(const ExperimentConfig& c, std::ostream& out) {
  const ConvergenceTable t = run_convergence_study(c);
  write_file_atomically(c.out_dir / "convergence.csv",
                        [&](std::ostream& o) { write_convergence_csv(t, o); });
  write_file_atomically(c.out_dir / "convergence_plot.csv",
                        [&](std::ostream& o) { write_convergence_plot_csv(t, o); });
  out << t.scenario << " (" << t.initial << ", " << to_string(t.scheme) << ")\n";
  out << "level  cells  h            err_l1        rate\n";
  for (const auto& r : t.rows) {
    out << std::setw(5) << r.level << "  " << std::setw(5) << r.cells << "  " << std::setw(11)
        << std::setprecision(5) << r.h << "  " << std::setw(12) << r.err_l1 << "  ";
    if (r.level == 0) {
      out << "-";
    } else {
      out << std::setprecision(3) << r.rate;
    }
    out << "\n";
  }
  out << "wrote " << (c.out_dir / "convergence.csv").string() << "\n";
  return 0;
}

int cmd_diagnose(const ExperimentConfig& c, std::ostream& out) {
  const SuiteResult r = run_diagnostics_suite(c);
  for (const auto& f : r.files) out << "wrote " << f << "\n";
  if (r.pass()) {
    out << "all diagnostics passed\n";
    return 0;
  }
  for (const auto& f : r.failures) out << "FAIL " << f << "\n";
  return 2;
}

int cmd_check_flux(const ExperimentConfig& c, std::ostream& out) {
  const Scenario s = scenario_of(c);
  const TotalFluxScheme scheme(c.scheme_for(s), s.flux->u_range(), c.scheme_options);
  const auto mesh = s.build_mesh();
  const FluxPropertyReport rep =
      check_mesh_flux_properties(scheme, *mesh, certification_slabs(*mesh), c.flux_samples, c.seed);
  write_file_atomically(c.out_dir / "flux_properties.csv",
                        [&](std::ostream& o) { write_flux_properties_csv(rep, o); });
  out << std::setprecision(6) << to_string(c.scheme_for(s)) << ": " << rep.faces_checked
      << " faces, " << rep.samples << " samples, max consistency " << rep.max_consistency
      << ", max conservation " << rep.max_conservation << ", min d_u q " << rep.min_du
      << ", max d_v q " << rep.max_dv << "\n";
  for (const auto& f : rep.failures) {
    out << "FAIL " << f.property << " slab " << f.slab << " face " << f.face << " at (" << f.u
        << ", " << f.v << "): " << f.residual << " vs " << f.threshold << "\n";
  }
  return rep.pass() ? 0 : 2;
}

int cmd_validate_mesh(const ExperimentConfig& c, std::ostream& out) {
  const Scenario s = scenario_of(c);
  const auto mesh = s.build_mesh();
  PreflightReport pre;
  pre.mesh = validate_mesh(*mesh);
  pre.hyperbolicity = validate_hyperbolicity(*mesh, mesh->flux());
  pre.geometry.pass = true;
  write_file_atomically(c.out_dir / "mesh_summary.csv",
                        [&](std::ostream& o) { write_mesh_summary_csv(*mesh, o); });
  out << std::setprecision(6) << s.id << ": " << mesh->num_cells() << " cells, "
      << mesh->num_slabs() << " slabs, h = " << mesh->h() << ", tau in [" << mesh->tau_min()
      << ", " << mesh->tau_max() << "]\n";
  out << "mesh: " << (pre.mesh.pass() ? "ok" : "FAILED") << ", " << pre.mesh.violations.size()
      << " violations, max Stokes residual " << pre.mesh.max_stokes_residual << "\n";
  for (const auto& v : pre.mesh.violations) {
    out << "FAIL " << v.kind << " slab " << v.slab << " element " << v.element << ": " << v.detail
        << "\n";
  }
  out << "hyperbolicity: " << (pre.hyperbolicity.pass ? "ok" : "FAILED") << ", max CFL margin "
      << pre.hyperbolicity.max_cfl_margin << "\n";
  return pre.mesh.pass() && pre.hyperbolicity.pass ? 0 : 2;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Space-time finite volume experiments on foliated meshes"};
  app.require_subcommand(1);
  Flags flags;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const ExperimentConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"run", "solve one scenario and write the trajectory", cmd_run},
      {"converge", "L1 convergence study against the exact solution", cmd_converge},
      {"diagnose", "run every entropy diagnostic and write CSV reports", cmd_diagnose},
      {"check-flux", "certify consistency, conservation and monotonicity", cmd_check_flux},
      {"validate-mesh", "check mesh tiling, Stokes identities and hyperbolicity", cmd_validate_mesh},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    add_flags(sub, flags);
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig config = resolve(flags);
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) return cmd->fn(config, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace stfv
