#include "stfv/experiments.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "stfv/csv.hpp"
#include "stfv/errors.hpp"

namespace stfv {

namespace {

// ---------------------------------------------------------------------------------------------
// Configuration.

int to_int(const std::string& v) {
  std::size_t pos = 0;
  const long long x = std::stoll(v, &pos);
  if (pos != v.size() || x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("integer");
  }
  return static_cast<int>(x);
}

double to_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument("finite number");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("boolean (true/false)");
}

std::uint64_t to_u64(const std::string& v) {
  std::size_t pos = 0;
  if (!v.empty() && v[0] == '-') throw std::invalid_argument("non-negative integer");
  const unsigned long long x = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("non-negative integer");
  return x;
}

std::vector<double> to_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument("comma-separated numbers");
    out.push_back(to_double(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw std::invalid_argument("comma-separated numbers");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& config_schema() {
  static const std::map<std::string, Setter> schema = {
      {"scenario.id", [](ExperimentConfig& c, const std::string& v) { c.scenario = v; }},
      {"scenario.cells", [](ExperimentConfig& c, const std::string& v) { c.params.cells = to_int(v); }},
      {"scenario.T", [](ExperimentConfig& c, const std::string& v) { c.params.T = to_double(v); }},
      {"scenario.cfl", [](ExperimentConfig& c, const std::string& v) { c.params.cfl = to_double(v); }},
      {"scenario.initial", [](ExperimentConfig& c, const std::string& v) { c.params.initial = v; }},
      {"scenario.motion_amplitude",
       [](ExperimentConfig& c, const std::string& v) { c.params.motion_amplitude = to_double(v); }},
      {"scenario.advection_a",
       [](ExperimentConfig& c, const std::string& v) { c.params.advection_a = to_double(v); }},
      {"scenario.advection_b",
       [](ExperimentConfig& c, const std::string& v) { c.params.advection_b = to_double(v); }},
      {"scenario.quadrature_points",
       [](ExperimentConfig& c, const std::string& v) { c.params.quadrature_points = to_int(v); }},
      {"scenario.slabs", [](ExperimentConfig& c, const std::string& v) { c.params.slabs = to_int(v); }},
      {"scheme.kind", [](ExperimentConfig& c, const std::string& v) { c.scheme = parse_scheme_kind(v); }},
      {"scheme.lf_lambda_scale",
       [](ExperimentConfig& c, const std::string& v) { c.scheme_options.lf_lambda_scale = to_double(v); }},
      {"scheme.godunov_grid",
       [](ExperimentConfig& c, const std::string& v) { c.scheme_options.godunov_grid = to_int(v); }},
      {"run.levels", [](ExperimentConfig& c, const std::string& v) { c.levels = to_int(v); }},
      {"run.seed", [](ExperimentConfig& c, const std::string& v) {
         c.seed = to_u64(v);
         c.params.seed = c.seed;
       }},
      {"run.out", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
      {"diagnostics.entropy", [](ExperimentConfig& c, const std::string& v) { c.diag_entropy = to_bool(v); }},
      {"diagnostics.balance", [](ExperimentConfig& c, const std::string& v) { c.diag_balance = to_bool(v); }},
      {"diagnostics.dissipation",
       [](ExperimentConfig& c, const std::string& v) { c.diag_dissipation = to_bool(v); }},
      {"diagnostics.contraction",
       [](ExperimentConfig& c, const std::string& v) { c.diag_contraction = to_bool(v); }},
      {"diagnostics.global", [](ExperimentConfig& c, const std::string& v) { c.diag_global = to_bool(v); }},
      {"diagnostics.flux_samples",
       [](ExperimentConfig& c, const std::string& v) { c.flux_samples = to_int(v); }},
      {"diagnostics.contraction_pairs",
       [](ExperimentConfig& c, const std::string& v) { c.contraction_pairs = to_int(v); }},
      {"diagnostics.balance_pairs",
       [](ExperimentConfig& c, const std::string& v) { c.balance_pairs = to_int(v); }},
      {"diagnostics.kruzkov",
       [](ExperimentConfig& c, const std::string& v) { c.kruzkov_constants = to_list(v); }},
  };
  return schema;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Line of `key` inside `[section]`, 0 when not found.
int find_line(const std::string& text, const std::string& section, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  std::string current;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos && current == section && trim(t.substr(0, eq)) == key) return n;
  }
  return 0;
}

void check_config(const ExperimentConfig& c) {
  if (c.levels < 2) throw ConfigError("run.levels must be at least 2");
  if (c.flux_samples < 1) throw ConfigError("diagnostics.flux_samples must be positive");
  if (c.contraction_pairs < 0) throw ConfigError("diagnostics.contraction_pairs must be >= 0");
  if (c.balance_pairs < 0) throw ConfigError("diagnostics.balance_pairs must be >= 0");
  if (c.params.quadrature_points < 1 || c.params.quadrature_points > 20) {
    throw ConfigError("scenario.quadrature_points must lie in [1, 20]");
  }
  if (c.params.slabs && *c.params.slabs < 1) throw ConfigError("scenario.slabs must be positive");
}

// ---------------------------------------------------------------------------------------------

TotalFluxScheme make_scheme(const ExperimentConfig& c, const Scenario& s) {
  return TotalFluxScheme(c.scheme_for(s), s.flux->u_range(), c.scheme_options);
}

Scenario make(const ExperimentConfig& c) {
  ScenarioParams p = c.params;
  p.seed = c.seed;
  return make_scenario(c.scenario, p);
}

void write_csv(SuiteResult& res, const std::filesystem::path& dir, const std::string& name,
               const std::function<void(std::ostream&)>& body) {
  write_file_atomically(dir / name, body);
  res.files.push_back((dir / name).string());
}

std::string witness_text(const ResidualSweep& s) {
  std::ostringstream os;
  os.precision(6);
  os << s.kind << ": " << s.failures << " of " << s.checked << " checks failed (max value "
     << s.max_value << ")";
  for (const auto& r : s.rows) {
    if (!r.pass) {
      os << ", first witness slab " << r.slab << " element " << r.element << " value " << r.value
         << " > " << r.threshold;
      break;
    }
  }
  return os.str();
}

DiagnosticRow row(std::string kind, int slab, int element, double value, double threshold) {
  return {std::move(kind), slab, element, value, threshold, value <= threshold};
}

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin,
                              ExperimentConfig base) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config " + origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto& schema = config_schema();
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("config " + origin + ":" + std::to_string(find_line(text, "", section)) +
                        ": key '" + section + "' is outside a section");
    }
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const int line = find_line(text, section, key);
      const std::string where = "config " + origin + ":" + std::to_string(line) + ": " + field;
      const auto it = schema.find(field);
      if (it == schema.end()) throw ConfigError(where + ": unknown key");
      const std::string v = trim(value.get_value<std::string>());
      try {
        it->second(base, v);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": expected " + std::string(e.what()) + ", got '" + v + "'");
      } catch (const std::out_of_range&) {
        throw ConfigError(where + ": value '" + v + "' out of range");
      }
    }
  }
  check_config(base);
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), std::move(base));
}

// ---------------------------------------------------------------------------------------------

std::string PreflightReport::summary() const {
  std::ostringstream os;
  os.precision(6);
  os << "mesh: " << (mesh.pass() ? "ok" : "FAILED") << " (" << mesh.violations.size()
     << " violations, max Stokes residual " << mesh.max_stokes_residual << ")\n";
  for (std::size_t i = 0; i < mesh.violations.size() && i < 5; ++i) {
    const auto& v = mesh.violations[i];
    os << "  " << v.kind << " slab " << v.slab << " element " << v.element << ": " << v.detail << "\n";
  }
  os << "hyperbolicity: " << (hyperbolicity.pass ? "ok" : "FAILED") << " (c in ["
     << hyperbolicity.c_lower << ", " << hyperbolicity.c_upper << "], max CFL margin "
     << hyperbolicity.max_cfl_margin << " at slab " << hyperbolicity.worst_slab << " element "
     << hyperbolicity.worst_element << ")\n";
  os << "closedness: " << (geometry.pass ? "ok" : "FAILED") << " (residual " << geometry.max_residual
     << ")\n";
  os << "flux properties: " << (flux.pass() ? "ok" : "FAILED") << " (" << flux.faces_checked
     << " faces, " << flux.samples << " samples, " << flux.failure_count << " failures)\n";
  for (std::size_t i = 0; i < flux.failures.size() && i < 5; ++i) {
    const auto& f = flux.failures[i];
    os << "  " << f.property << " slab " << f.slab << " face " << f.face << " at (" << f.u << ", "
       << f.v << "): " << f.residual << " vs " << f.threshold << "\n";
  }
  return os.str();
}

PreflightReport preflight(const FoliatedMesh& mesh, const TotalFluxScheme& scheme, int samples,
                          std::uint64_t seed) {
  PreflightReport r;
  r.mesh = validate_mesh(mesh);
  r.hyperbolicity = validate_hyperbolicity(mesh, mesh.flux());
  std::mt19937_64 rng(seed);
  const StateRange& range = mesh.flux().u_range();
  std::uniform_real_distribution<double> ud(range.lo, range.hi);
  std::uniform_real_distribution<double> xd(0.0, 1.0);
  std::vector<GeometryCheckSample> pts(64);
  const double T = mesh.slice_times().back();
  for (auto& p : pts) {
    p.u = ud(rng);
    p.x = Point{};
    p.x[0] = T * xd(rng);
    for (int k = 1; k <= mesh.space_dim(); ++k) p.x[k] = xd(rng);
  }
  r.geometry = check_geometry_compatible(mesh.flux(), pts, 1e-4);
  r.certified_slabs = certification_slabs(mesh);
  r.flux = check_mesh_flux_properties(scheme, mesh, r.certified_slabs, samples, seed);
  return r;
}

double l1_error(const FoliatedMesh& mesh, int slice, const std::vector<double>& u,
                const Oracle& oracle) {
  const QuadratureRule rule = QuadratureRule::gauss_legendre(5);
  double total = 0.0;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const FaceQuadrature fq(mesh.slice_face(slice, k), rule);
    total += fq.integrate_area([&](const Point& x) { return std::abs(u[k] - oracle(x[0], x)); });
  }
  return total;
}

// ---------------------------------------------------------------------------------------------

double ConvergenceTable::min_rate() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rows.size(); ++i) m = std::min(m, rows[i].rate);
  return m;
}

ConvergenceTable run_convergence_study(const ExperimentConfig& config) {
  check_config(config);
  const Scenario s = make(config);
  const InitialCondition ic = s.initial();
  if (!ic.oracle) {
    if (s.id == "torus-advection-2d" && ic.id == "sine") {
      throw ConfigError("translation oracle needs a rational ratio a/b (got a = " +
                        format_double(s.params.advection_a) +
                        ", b = " + format_double(s.params.advection_b) + ")");
    }
    throw ConfigError("initial data '" + ic.id + "' of " + s.id + " has no exact oracle");
  }
  ConvergenceTable table;
  table.scenario = s.id;
  table.initial = ic.id;
  table.scheme = config.scheme_for(s);
  const TotalFluxScheme scheme = make_scheme(config, s);
  auto levels = refinement_sequence(s.refinement(), config.levels);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto mesh = std::make_shared<const FoliatedMesh>(std::move(levels[l].mesh));
    const Trajectory traj = run(mesh, scheme, ic.u0);
    ConvergenceRow r;
    r.level = static_cast<int>(l);
    r.cells = levels[l].cells;
    r.h = levels[l].h;
    r.tau = levels[l].tau_max;
    r.err_l1 = l1_error(*mesh, mesh->num_slabs(), traj.states().back().u, *ic.oracle);
    r.rate = l == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : std::log2(table.rows.back().err_l1 / r.err_l1);
    table.rows.push_back(r);
  }
  return table;
}

void write_convergence_csv(const ConvergenceTable& table, std::ostream& out) {
  out << "level,h,tau,err_l1,rate\n";
  for (const auto& r : table.rows) {
    out << r.level << ',' << fmt17(r.h) << ',' << fmt17(r.tau) << ',' << fmt17(r.err_l1) << ','
        << fmt17(r.rate) << '\n';
  }
}

void write_convergence_plot_csv(const ConvergenceTable& table, std::ostream& out) {
  out << "level,log2_h,log2_err,first_order_reference,half_order_reference\n";
  if (table.rows.empty()) return;
  const double h0 = std::log2(table.rows.front().h);
  const double e0 = std::log2(table.rows.front().err_l1);
  for (const auto& r : table.rows) {
    const double lh = std::log2(r.h);
    out << r.level << ',' << fmt17(lh) << ',' << fmt17(std::log2(r.err_l1)) << ','
        << fmt17(e0 + (lh - h0)) << ',' << fmt17(e0 + 0.5 * (lh - h0)) << '\n';
  }
}

std::vector<TestFunction> default_test_functions(int dimension, double T) {
  if (dimension == 1) {
    return {TestFunction(1, 0.5 * T, {0.3, 0.0, 0.0}, 0.2),
            TestFunction(1, 0.5 * T, {0.65, 0.0, 0.0}, 0.3)};
  }
  return {TestFunction(dimension, 0.5 * T, {0.3, 0.4, 0.0}, 0.25),
          TestFunction(dimension, 0.5 * T, {0.7, 0.6, 0.0}, 0.3)};
}

std::vector<RefinementDiagnosticsRow> run_refinement_diagnostics(const ExperimentConfig& config) {
  check_config(config);
  const Scenario s = make(config);
  const InitialCondition ic = s.initial();
  const TotalFluxScheme scheme = make_scheme(config, s);
  const EntropyFluxField quadratic(s.flux, ConvexEntropy::quadratic());
  const auto psis = default_test_functions(s.dimension, s.params.T);
  SolverConfig sc;
  sc.record_intermediates = true;
  std::vector<RefinementDiagnosticsRow> out;
  auto levels = refinement_sequence(s.refinement(), config.levels);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto mesh = std::make_shared<const FoliatedMesh>(std::move(levels[l].mesh));
    const Trajectory traj = run(mesh, scheme, ic.u0, sc);
    RefinementDiagnosticsRow r;
    r.level = static_cast<int>(l);
    r.cells = levels[l].cells;
    r.h = levels[l].h;
    r.dissipation = dissipation_estimate(traj, ic.u0);
    for (const auto& psi : psis) r.terms.push_back(global_inequality_terms(traj, psi, quadratic));
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

SuiteResult run_diagnostics_suite(const ExperimentConfig& config) {
  check_config(config);
  SuiteResult res;
  const auto& dir = config.out_dir;
  const Scenario s = make(config);
  const InitialCondition ic = s.initial();
  const TotalFluxScheme scheme = make_scheme(config, s);
  const auto mesh = s.build_mesh();

  const PreflightReport pre = preflight(*mesh, scheme, config.flux_samples, config.seed);
  res.preflight_mesh_ok = pre.mesh_ok();
  res.preflight_flux_ok = pre.flux_ok();
  write_csv(res, dir, "mesh_summary.csv", [&](std::ostream& o) { write_mesh_summary_csv(*mesh, o); });
  write_csv(res, dir, "flux_properties.csv",
            [&](std::ostream& o) { write_flux_properties_csv(pre.flux, o); });
  {
    std::vector<DiagnosticRow> rows{
        row("mesh_violations", -1, -1, static_cast<double>(pre.mesh.violations.size()), 0.0),
        row("max_cfl_margin", pre.hyperbolicity.worst_slab, pre.hyperbolicity.worst_element,
            pre.hyperbolicity.max_cfl_margin, 1.0),
        row("neg_c_lower", -1, -1, -pre.hyperbolicity.c_lower, 0.0),
        row("closedness_residual", -1, -1, pre.geometry.max_residual, pre.geometry.threshold),
        row("flux_property_failures", -1, -1, static_cast<double>(pre.flux.failure_count), 0.0),
    };
    rows[1].pass = pre.hyperbolicity.max_cfl_margin < 1.0;
    rows[2].pass = pre.hyperbolicity.c_lower > 0.0;
    write_csv(res, dir, "preflight.csv", [&](std::ostream& o) { write_diagnostic_rows_csv(rows, o); });
  }
  if (!pre.mesh_ok()) {
    res.failures.push_back("preflight mesh validation failed:\n" + pre.summary());
    return res;
  }
  if (!pre.flux_ok()) res.failures.push_back("preflight flux certification failed:\n" + pre.summary());

  SolverConfig sc;
  sc.record_intermediates = true;
  const Trajectory traj = run(mesh, scheme, ic.u0, sc);
  write_csv(res, dir, "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(traj, o); });
  write_csv(res, dir, "intermediates.csv",
            [&](std::ostream& o) { write_intermediates_csv(traj, o); });

  const EntropyFluxField quadratic(s.flux, ConvexEntropy::quadratic());

  if (config.diag_entropy) {
    std::vector<DiagnosticRow> face_rows;
    std::vector<DiagnosticRow> element_rows;
    auto sweep = [&](const EntropyFluxField& e, const std::string& label) {
      const auto sw = sweep_entropy_residuals(traj, e, label);
      for (const auto* part : {&sw.face, &sw.element}) {
        if (!part->pass()) res.failures.push_back(witness_text(*part));
      }
      face_rows.insert(face_rows.end(), sw.face.rows.begin(), sw.face.rows.end());
      element_rows.insert(element_rows.end(), sw.element.rows.begin(), sw.element.rows.end());
    };
    sweep(quadratic, "quadratic");
    for (double c : config.kruzkov_constants) {
      sweep(EntropyFluxField(s.flux, KruzkovEntropy{c}), "kruzkov_c=" + format_double(c));
    }
    write_csv(res, dir, "face_entropy_residuals.csv",
              [&](std::ostream& o) { write_diagnostic_rows_csv(face_rows, o); });
    write_csv(res, dir, "element_entropy_residuals.csv",
              [&](std::ostream& o) { write_diagnostic_rows_csv(element_rows, o); });
  }

  if (config.diag_balance) {
    const ConvexityEstimate est = estimate_convexity(traj, quadratic);
    const BalanceTable table = make_balance_table(traj, quadratic, est);
    const int N = mesh->num_slabs();
    std::vector<std::pair<int, int>> pairs{{0, N}, {0, 0}};
    std::mt19937_64 rng(config.seed ^ 0x5bd1e995ULL);
    std::uniform_int_distribution<int> pick(0, N);
    while (static_cast<int>(pairs.size()) < std::max(config.balance_pairs, 2)) {
      int i = pick(rng);
      int j = pick(rng);
      if (i > j) std::swap(i, j);
      pairs.emplace_back(i, j);
    }
    pairs.resize(std::min<std::size_t>(pairs.size(), std::max(config.balance_pairs, 0)));
    std::vector<DiagnosticRow> rows;
    DiagnosticRow beta_row = row("beta_global", -1, -1, est.beta, 0.0);
    beta_row.pass = !est.degenerate();
    rows.push_back(beta_row);
    if (est.degenerate()) {
      res.failures.push_back("entropy balance: degenerate convexity modulus beta = " +
                             format_double(est.beta) + " (checked with beta = 0)");
    }
    for (auto [i, j] : pairs) {
      for (bool local : {false, true}) {
        const BalanceResult b =
            local ? entropy_balance_local(table, i, j) : entropy_balance(table, i, j, est.beta);
        DiagnosticRow r = row(local ? "balance_local_beta" : "balance_global_beta", i, j,
                              b.lhs + b.dissipation - b.rhs, b.threshold);
        rows.push_back(r);
        rows.push_back(row(local ? "balance_local_dissipation" : "balance_global_dissipation", i,
                           j, b.dissipation, std::numeric_limits<double>::infinity()));
        if (!b.pass) {
          res.failures.push_back("entropy balance (" + std::string(local ? "local" : "global") +
                                 " beta) fails between slices " + std::to_string(i) + " and " +
                                 std::to_string(j) + ": excess " +
                                 format_double(b.lhs + b.dissipation - b.rhs));
        }
      }
    }
    write_csv(res, dir, "entropy_balance.csv",
              [&](std::ostream& o) { write_diagnostic_rows_csv(rows, o); });
  }

  if (config.diag_dissipation) {
    const DissipationEstimate d = dissipation_estimate(traj, ic.u0);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<DiagnosticRow> rows{
        row("dissipation_sum", -1, -1, d.lhs_sum, inf),
        row("initial_entropy", -1, -1, d.initial_entropy, inf),
        row("dissipation_ratio", -1, -1, d.ratio, inf),
    };
    write_csv(res, dir, "dissipation.csv", [&](std::ostream& o) { write_diagnostic_rows_csv(rows, o); });
  }

  if (config.diag_contraction) {
    std::vector<DiagnosticRow> rows;
    for (int p = 0; p < config.contraction_pairs; ++p) {
      const std::uint64_t base = config.seed * 1000003ULL + 2ULL * static_cast<std::uint64_t>(p);
      const Trajectory a = run(mesh, scheme, s.initial("random-step", base + 1).u0);
      const Trajectory b = run(mesh, scheme, s.initial("random-step", base + 2).u0);
      const auto series = contraction_series(a, b);
      const std::string kind = "contraction_pair" + std::to_string(p);
      long fails = 0;
      rows.push_back(row(kind + "_distance", 0, -1, series[0], std::numeric_limits<double>::infinity()));
      for (std::size_t i = 1; i < series.size(); ++i) {
        DiagnosticRow r = row(kind + "_increment", static_cast<int>(i), -1, series[i] - series[i - 1],
                              1e-10 * (1.0 + series[i - 1]));
        if (!r.pass) ++fails;
        rows.push_back(r);
      }
      if (fails > 0) {
        res.failures.push_back("contraction pair " + std::to_string(p) + ": distance grows on " +
                               std::to_string(fails) + " slabs");
      }
    }
    write_csv(res, dir, "contraction.csv", [&](std::ostream& o) { write_diagnostic_rows_csv(rows, o); });
  }

  if (config.diag_global) {
    std::vector<DiagnosticRow> rows;
    const auto psis = default_test_functions(s.dimension, s.params.T);
    for (std::size_t n = 0; n < psis.size(); ++n) {
      const GlobalInequalityTerms g = global_inequality_terms(traj, psis[n], quadratic);
      const std::string kind = "global_psi" + std::to_string(n);
      const double inf = std::numeric_limits<double>::infinity();
      rows.push_back(row(kind + "_lhs_minus_abc", -1, -1, g.lhs - (g.A + g.B + g.C), g.threshold));
      rows.push_back(row(kind + "_lhs", -1, -1, g.lhs, inf));
      rows.push_back(row(kind + "_A", -1, -1, g.A, inf));
      rows.push_back(row(kind + "_B", -1, -1, g.B, inf));
      rows.push_back(row(kind + "_C", -1, -1, g.C, inf));
      if (!g.pass()) {
        res.failures.push_back("global entropy inequality fails for " + psis[n].describe() +
                               ": lhs - (A + B + C) = " + format_double(g.lhs - (g.A + g.B + g.C)));
      }
    }
    write_csv(res, dir, "global_inequality.csv",
              [&](std::ostream& o) { write_diagnostic_rows_csv(rows, o); });
  }
  return res;
}

}  // namespace stfv
