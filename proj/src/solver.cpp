#include "stfv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stfv/csv.hpp"
#include "stfv/errors.hpp"

namespace stfv {

namespace {

constexpr double kClampSlack = 1e-9;

[[noreturn]] void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const CflError& e) {
    throw CflError(ctx + ": " + e.what(), e.margin());
  } catch (const InversionRangeError& e) {
    throw InversionRangeError(ctx + ": " + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx + ": " + e.what());
  } catch (const EvaluationError& e) {
    throw EvaluationError(e.alpha(), e.where(), ctx + ": " + e.what());
  } catch (const DegenerateFaceError& e) {
    throw DegenerateFaceError(ctx + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ctx + ": " + e.what());
  }
}

std::string where(int slab, int k) {
  return "slab " + std::to_string(slab) + ", element " + std::to_string(k);
}

}  // namespace

void SolverConfig::validate() const {
  if (!(inversion_tol > 0.0 && inversion_tol <= 1e-6)) {
    throw ConfigError("solver inversion tolerance must lie in (0, 1e-6]");
  }
}

ProjectionResult project_initial_data(const FoliatedMesh& mesh, const InitialData& u0,
                                      const SolverConfig& config) {
  config.validate();
  const FluxField& flux = mesh.flux();
  ProjectionResult out;
  out.state.slab = 0;
  out.state.time = mesh.slice_times().front();
  out.state.u.resize(mesh.num_cells());
  const StateRange& range = flux.u_range();
  for (int k = 0; k < mesh.num_cells(); ++k) {
    try {
      const FaceQuadrature fq(mesh.lower_face(0, k), mesh.quadrature());
      const double measure = mesh.e_minus(0, k);
      const double total =
          fq.integrate([&](int a, const Point& x) { return flux.component(a, u0(x), x); });
      double u = invert_averaged_flux(flux, fq, measure, total / measure, config.inversion_tol);
      if (!range.contains(u)) {
        if (!range.contains(u, kClampSlack)) {
          std::ostringstream os;
          os.precision(17);
          os << "projected value " << u << " outside the state range [" << range.lo << ", "
             << range.hi << "]";
          throw InversionRangeError(os.str());
        }
        const double clamped = std::clamp(u, range.lo, range.hi);
        std::ostringstream os;
        os.precision(17);
        os << "element " << k << ": projected value " << u << " clamped to " << clamped;
        out.warnings.push_back(os.str());
        u = clamped;
      }
      out.state.u[k] = u;
    } catch (const Error&) {
      rethrow_with_context("initial projection, element " + std::to_string(k));
    }
  }
  return out;
}

StepResult step_element(const FoliatedMesh& mesh, int slab, int k, const SliceState& state,
                        const TotalFluxScheme& scheme, const SolverConfig& config) {
  const double margin = mesh.cfl_margin(slab, k);
  if (!(margin <= 1.0)) {
    std::ostringstream os;
    os << "CFL margin " << margin << " exceeds 1 at " << where(slab, k);
    throw CflError(os.str(), margin);
  }
  const FluxField& flux = mesh.flux();
  const Cell& cell = mesh.cell(k);
  const double uk = state.u[k];
  const FaceQuadrature lower(mesh.lower_face(slab, k), mesh.quadrature());
  const FaceQuadrature upper(mesh.upper_face(slab, k), mesh.quadrature());
  const double ep = mesh.e_plus(slab, k);

  const int nk = static_cast<int>(cell.faces.size());
  std::vector<double> q(nk);
  std::vector<double> q_self(nk);
  double rhs = lower.flux(flux, uk);
  for (int j = 0; j < nk; ++j) {
    const FaceFlux face = mesh_face_flux(mesh, slab, k, j);
    q[j] = scheme.evaluate(face, uk, state.u[cell.faces[j].neighbor]);
    if (config.record_intermediates) q_self[j] = scheme.evaluate(face, uk, uk);
    rhs -= q[j];
  }
  StepResult out;
  out.u_plus = invert_averaged_flux(flux, upper, ep, rhs / ep, config.inversion_tol);
  if (config.record_intermediates) {
    const double phi_plus_of_uk = upper.flux(flux, uk) / ep;
    out.intermediates.resize(nk);
    for (int j = 0; j < nk; ++j) {
      const double target = phi_plus_of_uk - nk / ep * (q[j] - q_self[j]);
      out.intermediates[j] = invert_averaged_flux(flux, upper, ep, target, config.inversion_tol);
    }
  }
  return out;
}

AdvanceResult advance_slice(const FoliatedMesh& mesh, const SliceState& state,
                            const TotalFluxScheme& scheme, const SolverConfig& config) {
  const int slab = state.slab;
  if (slab < 0 || slab >= mesh.num_slabs()) {
    throw DomainError("advance_slice: state slab " + std::to_string(slab) + " has no successor");
  }
  if (static_cast<int>(state.u.size()) != mesh.num_cells()) {
    throw DomainError("advance_slice: state size does not match the mesh");
  }
  AdvanceResult out;
  out.next.slab = slab + 1;
  out.next.time = mesh.slice_times()[slab + 1];
  out.next.u.assign(mesh.num_cells(), 0.0);
  if (config.record_intermediates) out.intermediates.resize(mesh.num_cells());
  for (int k = 0; k < mesh.num_cells(); ++k) {
    try {
      StepResult r = step_element(mesh, slab, k, state, scheme, config);
      out.next.u[mesh.next_cell(slab, k)] = r.u_plus;
      if (config.record_intermediates) out.intermediates[k] = std::move(r.intermediates);
    } catch (const Error&) {
      rethrow_with_context(where(slab, k));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

Trajectory::Trajectory(std::shared_ptr<const FoliatedMesh> mesh, TotalFluxScheme scheme,
                       SolverConfig config)
    : mesh_(std::move(mesh)), scheme_(std::move(scheme)), config_(config) {}

double Trajectory::intermediate(int slab, int k, int j) const {
  if (intermediates_.empty()) {
    throw ConfigError("intermediate values were not recorded for this trajectory");
  }
  return intermediates_[slab][k][j];
}

void Trajectory::push(SliceState state, std::vector<std::vector<double>> intermediates) {
  states_.push_back(std::move(state));
  if (!intermediates.empty()) intermediates_.push_back(std::move(intermediates));
}

Trajectory run_from_state(std::shared_ptr<const FoliatedMesh> mesh, const TotalFluxScheme& scheme,
                          SliceState initial, const SolverConfig& config) {
  config.validate();
  Trajectory traj(mesh, scheme, config);
  traj.push(std::move(initial), {});
  for (int s = 0; s < mesh->num_slabs(); ++s) {
    AdvanceResult r = advance_slice(*mesh, traj.state(s), scheme, config);
    traj.push(std::move(r.next), std::move(r.intermediates));
  }
  return traj;
}

Trajectory run(std::shared_ptr<const FoliatedMesh> mesh, const TotalFluxScheme& scheme,
               const InitialData& u0, const SolverConfig& config) {
  ProjectionResult p = project_initial_data(*mesh, u0, config);
  Trajectory traj = run_from_state(mesh, scheme, std::move(p.state), config);
  for (auto& w : p.warnings) traj.add_warning(std::move(w));
  return traj;
}

// ---------------------------------------------------------------------------------------------

double reconstruct(const Trajectory& trajectory, double t, const Point& x) {
  const FoliatedMesh& mesh = trajectory.mesh();
  const auto& times = mesh.slice_times();
  if (!(t >= times.front() && t <= times.back())) {
    throw DomainError("reconstruct: time " + fmt17(t) + " outside [0, T]");
  }
  const int n = mesh.space_dim();
  for (int a = 1; a <= n; ++a) {
    if (!std::isfinite(x[a])) throw DomainError("reconstruct: non-finite coordinate");
  }
  int i = static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
  i = std::clamp(i, 0, mesh.num_slabs());
  // Spatial vertex positions of the prism cross-section at time t.
  const int i1 = std::min(i + 1, mesh.num_slabs());
  const double s = (i1 == i) ? 0.0 : (t - times[i]) / (times[i1] - times[i]);
  auto pos = [&](int v, int axis) {
    return (1.0 - s) * mesh.vertex(i, v)[axis] + s * mesh.vertex(i1, v)[axis];
  };
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& verts = mesh.cell(k).vertices;
    bool inside = true;
    for (int axis = 0; axis < n && inside; ++axis) {
      const int hi_corner = 1 << axis;
      const double a = pos(verts[0], axis);
      const double b = pos(verts[hi_corner], axis);
      // Periodic chart: shift into [a, a + 1).
      const double xv = x[axis + 1] - std::floor(x[axis + 1] - a);
      inside = xv <= b;
    }
    if (inside) return trajectory.state(i).u[k];
  }
  throw DomainError("reconstruct: point " + to_string(x, n + 1) + " not covered by the mesh");
}

double slice_total(const FoliatedMesh& mesh, int slice, const std::vector<double>& u) {
  double total = 0.0;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    total += FaceQuadrature(mesh.slice_face(slice, k), mesh.quadrature()).flux(mesh.flux(), u[k]);
  }
  return total;
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  out << "slab,time,element,u\n";
  for (const SliceState& s : trajectory.states()) {
    const std::string t = fmt17(s.time);
    for (std::size_t k = 0; k < s.u.size(); ++k) {
      out << s.slab << ',' << t << ',' << k << ',' << fmt17(s.u[k]) << '\n';
    }
  }
}

void write_intermediates_csv(const Trajectory& trajectory, std::ostream& out) {
  out << "slab,element,face,u_tilde\n";
  if (!trajectory.has_intermediates()) return;
  const FoliatedMesh& mesh = trajectory.mesh();
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const auto& refs = mesh.cell(k).faces;
      for (std::size_t j = 0; j < refs.size(); ++j) {
        out << s << ',' << k << ',' << refs[j].face << ','
            << fmt17(trajectory.intermediate(s, k, static_cast<int>(j))) << '\n';
      }
    }
  }
}

}  // namespace stfv
