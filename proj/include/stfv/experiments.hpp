#pragma once

// Reproducible runs: configuration, preflight validation, convergence studies, the
// diagnostics suite and the command-line front end.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stfv/diagnostics.hpp"
#include "stfv/scenarios.hpp"

namespace stfv {

struct ExperimentConfig {
  std::string scenario;
  ScenarioParams params;
  std::optional<SchemeKind> scheme;  // scenario default when unset
  SchemeOptions scheme_options;
  int levels = 3;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;

  bool diag_entropy = true;
  bool diag_balance = true;
  bool diag_dissipation = true;
  bool diag_contraction = true;
  bool diag_global = true;
  int flux_samples = 1000;
  int contraction_pairs = 5;
  int balance_pairs = 10;
  std::vector<double> kruzkov_constants{-0.5, 0.0, 0.5};

  SchemeKind scheme_for(const Scenario& s) const { return scheme.value_or(s.default_scheme); }
};

/// Reads an INI file (sections scenario, scheme, run, diagnostics) on top of `base`.
/// Throws ConfigError naming the line and the offending section.key.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Same, from text; `origin` names the source in messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin,
                              ExperimentConfig base = {});

// ---------------------------------------------------------------------------------------------

struct PreflightReport {
  MeshValidationReport mesh;
  HyperbolicityReport hyperbolicity;
  GeometryCompatibilityReport geometry;
  FluxPropertyReport flux;
  std::vector<int> certified_slabs;
  bool mesh_ok() const { return mesh.pass() && hyperbolicity.pass && geometry.pass; }
  bool flux_ok() const { return flux.pass(); }
  std::string summary() const;
};

/// Mesh validation, hyperbolicity, closedness of the flux field and randomized flux-property
/// certification with `samples` states per face.
PreflightReport preflight(const FoliatedMesh& mesh, const TotalFluxScheme& scheme, int samples,
                          std::uint64_t seed);

/// L1 distance on slice i between the piecewise-constant state and an oracle, 5 Gauss points
/// per axis and cell.
double l1_error(const FoliatedMesh& mesh, int slice, const std::vector<double>& u,
                const Oracle& oracle);

// ---------------------------------------------------------------------------------------------

struct ConvergenceRow {
  int level = 0;
  int cells = 0;
  double h = 0.0;
  double tau = 0.0;  // tau_max
  double err_l1 = 0.0;
  double rate = 0.0;  // log2(e_{k-1} / e_k); NaN on level 0
};

struct ConvergenceTable {
  std::string scenario;
  std::string initial;
  SchemeKind scheme = SchemeKind::godunov;
  std::vector<ConvergenceRow> rows;
  double min_rate() const;
};

/// Needs an oracle for the selected initial data (ConfigError otherwise).
ConvergenceTable run_convergence_study(const ExperimentConfig& config);
/// level,h,tau,err_l1,rate
void write_convergence_csv(const ConvergenceTable& table, std::ostream& out);
/// level,log2_h,log2_err,first_order_reference,half_order_reference
void write_convergence_plot_csv(const ConvergenceTable& table, std::ostream& out);

/// The two bump test functions used by the global inequality diagnostics.
std::vector<TestFunction> default_test_functions(int dimension, double T);

struct RefinementDiagnosticsRow {
  int level = 0;
  int cells = 0;
  double h = 0.0;
  DissipationEstimate dissipation;
  std::vector<GlobalInequalityTerms> terms;  // one per test function
};

/// Dissipation ratio and global-inequality terms (quadratic entropy) along the refinement
/// sequence of the configured scenario.
std::vector<RefinementDiagnosticsRow> run_refinement_diagnostics(const ExperimentConfig& config);

// ---------------------------------------------------------------------------------------------

struct SuiteResult {
  bool preflight_mesh_ok = true;
  bool preflight_flux_ok = true;
  std::vector<std::string> failures;  // one line per failed check, with witnesses
  std::vector<std::string> files;     // written outputs
  bool pass() const { return failures.empty(); }
};

/// Runs the scenario with intermediates and every enabled diagnostic; writes one CSV per
/// diagnostic into config.out_dir. A failed mesh preflight aborts after writing its report.
SuiteResult run_diagnostics_suite(const ExperimentConfig& config);

/// Exit codes: 0 success, 2 failed assertion, 1 error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stfv
