#pragma once

// Shipped scenarios (flux field, mesh family, initial data) and their exact-solution oracles.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stfv/forms.hpp"
#include "stfv/mesh.hpp"
#include "stfv/numflux.hpp"
#include "stfv/solver.hpp"

namespace stfv {

// ---------------------------------------------------------------------------------------------
// Oracles.

/// Solves u = u0(x - u t) by safeguarded Newton to 1e-13. Requires t < break_time, otherwise
/// throws DomainError. u0 must be 1-periodic with range inside [u_lo, u_hi].
double burgers_characteristic(const std::function<double(double)>& u0,
                              const std::function<double(double)>& du0, double break_time,
                              double u_lo, double u_hi, double t, double x);

/// Entropy solution of Burgers with Riemann data (u_left for x < 0, u_right for x > 0).
double burgers_riemann(double u_left, double u_right, double t, double x);

/// Exact solution u(t, x) of a scenario; throws DomainError outside its validity window.
using Oracle = std::function<double(double t, const Point& x)>;

/// X(x) = x - cos(2 pi x) / (4 pi), the potential of the density 1 + sin(2 pi x) / 2.
double density_potential(double x);
/// Inverse of X on the real line (X(x + 1) = X(x) + 1).
double density_potential_inverse(double X);

/// Smallest q <= max_q with |ratio - p/q| <= tol for some integer p, or nullopt.
std::optional<int> rational_denominator(double ratio, int max_q = 1000, double tol = 1e-12);

// ---------------------------------------------------------------------------------------------
// Registry.

struct ScenarioParams {
  int cells = 0;          // per axis; 0 selects the scenario default
  double cfl = 0.5;
  double T = 0.0;         // 0 selects the scenario default
  std::string initial;    // empty selects the scenario default
  std::uint64_t seed = 1;
  /// Node velocity amplitude for scenarios that accept motion (C always moves; B optionally).
  double motion_amplitude = -1.0;  // negative selects the scenario default
  double advection_a = 1.0;         // scenario D
  double advection_b = 0.5;
  int quadrature_points = 5;
  std::optional<int> slabs;
};

struct InitialCondition {
  std::string id;
  InitialData u0;
  std::optional<Oracle> oracle;
};

struct Scenario {
  std::string id;
  std::string description;
  int dimension = 1;
  std::shared_ptr<const FluxField> flux;
  MotionFn motion;  // empty for static meshes
  ScenarioParams params;  // defaults resolved
  SchemeKind default_scheme = SchemeKind::godunov;
  std::vector<std::string> initial_ids;

  /// Throws ConfigError for an unknown id.
  InitialCondition initial(const std::string& id, std::uint64_t seed) const;
  InitialCondition initial() const { return initial(params.initial, params.seed); }
  std::shared_ptr<const FoliatedMesh> build_mesh() const;
  RefinementConfig refinement() const;
};

/// Ids in registry order.
std::vector<std::string> scenario_registry();
/// Throws ConfigError listing the registry for an unknown id.
Scenario make_scenario(const std::string& id, ScenarioParams params = {});

}  // namespace stfv
