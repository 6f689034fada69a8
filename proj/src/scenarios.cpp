#include "stfv/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "stfv/errors.hpp"

namespace stfv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOracleTol = 1e-13;

double wrap01(double x) { return x - std::floor(x); }

double sine_1d(double x) { return 0.5 + 0.4 * std::sin(2.0 * kPi * x); }
double sine_1d_dx(double x) { return 0.8 * kPi * std::cos(2.0 * kPi * x); }
constexpr double kSineBreakTime = 1.0 / (0.8 * kPi);

double pulse(double x) {
  const double y = wrap01(x);
  return (y >= 0.1 && y < 0.5) ? 1.0 : 0.0;
}

// Burgers solution from the pulse: rarefaction from x = 0.1, shock x = 0.5 + t/2, until the
// fan head reaches the shock at t = 0.8.
double pulse_solution(double t, double x) {
  if (t < 0.0 || t > 0.8) throw DomainError("pulse oracle is valid for t in [0, 0.8]");
  if (t == 0.0) return pulse(x);
  const double y = 0.1 + wrap01(x - 0.1);
  if (y <= 0.1 + t) return (y - 0.1) / t;
  if (y < 0.5 + 0.5 * t) return 1.0;
  return 0.0;
}

constexpr double kConstantState = 0.3;

// Piecewise-constant data with `pieces` equal cells per axis and seeded values in [-0.9, 0.9].
InitialData random_steps(int dim, int pieces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.9, 0.9);
  const int count = dim == 1 ? pieces : pieces * pieces;
  auto values = std::make_shared<std::vector<double>>(count);
  for (double& v : *values) v = dist(rng);
  return [values, dim, pieces](const Point& x) {
    auto idx = [pieces](double c) {
      return std::min(pieces - 1, static_cast<int>(wrap01(c) * pieces));
    };
    const int i = idx(x[1]);
    return (*values)[dim == 1 ? i : idx(x[2]) * pieces + i];
  };
}

std::shared_ptr<const FluxField> burgers_flux() {
  auto f = [](int a, double u, const Point&) { return a == 0 ? u : 0.5 * u * u; };
  auto df = [](int a, double u, const Point&) { return a == 0 ? 1.0 : u; };
  return std::make_shared<const FluxField>(
      FluxField::from_classical(1, f, df, {-1.0, 1.0}, true, "burgers").set_position_independent(true));
}

double density(double x) { return 1.0 + 0.5 * std::sin(2.0 * kPi * x); }

constexpr double kDensitySpeed = 0.8;

std::shared_ptr<const FluxField> density_flux() {
  auto f = [](int a, double u, const Point& x) {
    return a == 0 ? u * density(x[1]) : kDensitySpeed * u;
  };
  auto df = [](int a, double, const Point& x) { return a == 0 ? density(x[1]) : kDensitySpeed; };
  return std::make_shared<const FluxField>(
      FluxField::from_classical(1, f, df, {-1.0, 1.0}, true, "variable-density"));
}

std::shared_ptr<const FluxField> advection_flux(double a, double b) {
  auto f = [a, b](int alpha, double u, const Point&) {
    return alpha == 0 ? u : (alpha == 1 ? a * u : b * u);
  };
  auto df = [a, b](int alpha, double, const Point&) {
    return alpha == 0 ? 1.0 : (alpha == 1 ? a : b);
  };
  return std::make_shared<const FluxField>(
      FluxField::from_classical(2, f, df, {-1.0, 1.0}, true, "torus-advection").set_position_independent(true));
}

double sine_2d(double x, double y) {
  return 0.5 + 0.4 * std::sin(2.0 * kPi * x) * std::sin(2.0 * kPi * y);
}

MotionFn sine_motion(double amplitude) {
  return [amplitude](double, double x) { return amplitude * std::sin(2.0 * kPi * x); };
}

[[noreturn]] void unknown_initial(const Scenario& s, const std::string& id) {
  std::string list;
  for (const auto& i : s.initial_ids) list += (list.empty() ? "" : ", ") + i;
  throw ConfigError("scenario " + s.id + " has no initial data '" + id + "' (available: " + list + ")");
}

}  // namespace

// ---------------------------------------------------------------------------------------------

double burgers_characteristic(const std::function<double(double)>& u0,
                              const std::function<double(double)>& du0, double break_time,
                              double u_lo, double u_hi, double t, double x) {
  if (t < 0.0) throw DomainError("burgers oracle: negative time");
  if (!(t < break_time)) {
    throw DomainError("burgers oracle: t = " + std::to_string(t) +
                      " is past the gradient catastrophe at t = " + std::to_string(break_time));
  }
  if (t == 0.0) return u0(x);
  // g(u) = u - u0(x - u t) is increasing before breaking.
  auto g = [&](double u) { return u - u0(x - u * t); };
  double lo = u_lo;
  double hi = u_hi;
  double u = std::clamp(u0(x), lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double gu = g(u);
    if (gu == 0.0) return u;
    if (gu < 0.0) lo = u; else hi = u;
    const double dg = 1.0 + t * du0(x - u * t);
    double next = u - gu / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= kOracleTol * (1.0 + std::abs(u)) || hi - lo <= kOracleTol) {
      return next;
    }
    u = next;
  }
  throw ConvergenceError("burgers oracle: characteristic solve did not converge");
}

double burgers_riemann(double u_left, double u_right, double t, double x) {
  if (t < 0.0) throw DomainError("burgers_riemann: negative time");
  if (t == 0.0) return x < 0.0 ? u_left : u_right;
  if (u_left > u_right) {
    const double s = 0.5 * (u_left + u_right);
    return x < s * t ? u_left : u_right;
  }
  const double xi = x / t;
  if (xi <= u_left) return u_left;
  if (xi >= u_right) return u_right;
  return xi;
}

double density_potential(double x) { return x - std::cos(2.0 * kPi * x) / (4.0 * kPi); }

double density_potential_inverse(double X) {
  // X is increasing with slope in [1/2, 3/2]; Newton from X with a bisection guard.
  double lo = X - 1.0;
  double hi = X + 1.0;
  double x = X;
  for (int it = 0; it < 200; ++it) {
    const double r = density_potential(x) - X;
    if (r == 0.0) return x;
    if (r < 0.0) lo = x; else hi = x;
    double next = x - r / density(x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

std::optional<int> rational_denominator(double ratio, int max_q, double tol) {
  if (!std::isfinite(ratio)) return std::nullopt;
  for (int q = 1; q <= max_q; ++q) {
    const double p = std::round(ratio * q);
    if (std::abs(ratio - p / q) <= tol) return q;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------------------------

InitialCondition Scenario::initial(const std::string& which, std::uint64_t seed) const {
  if (std::find(initial_ids.begin(), initial_ids.end(), which) == initial_ids.end()) {
    unknown_initial(*this, which);
  }
  InitialCondition ic;
  ic.id = which;
  if (which == "constant") {
    ic.u0 = [](const Point&) { return kConstantState; };
    ic.oracle = [](double, const Point&) { return kConstantState; };
    return ic;
  }
  if (which == "random-step") {
    ic.u0 = random_steps(dimension, dimension == 1 ? 10 : 4, seed);
    return ic;
  }
  if (id == "variable-density-1d") {
    ic.u0 = [](const Point& x) { return sine_1d(x[1]); };
    ic.oracle = [](double t, const Point& x) {
      if (t < 0.0) throw DomainError("oracle: negative time");
      return sine_1d(density_potential_inverse(density_potential(x[1]) - kDensitySpeed * t));
    };
    return ic;
  }
  if (id == "torus-advection-2d") {
    const double a = params.advection_a;
    const double b = params.advection_b;
    ic.u0 = [](const Point& x) { return sine_2d(x[1], x[2]); };
    const bool rational = b == 0.0 || rational_denominator(a / b).has_value();
    if (rational) {
      ic.oracle = [a, b](double t, const Point& x) {
        if (t < 0.0) throw DomainError("oracle: negative time");
        return sine_2d(x[1] - a * t, x[2] - b * t);
      };
    }
    return ic;
  }
  // Burgers scenarios.
  if (which == "sine") {
    ic.u0 = [](const Point& x) { return sine_1d(x[1]); };
    ic.oracle = [](double t, const Point& x) {
      return burgers_characteristic(sine_1d, sine_1d_dx, kSineBreakTime, 0.1, 0.9, t, x[1]);
    };
  } else {
    ic.u0 = [](const Point& x) { return pulse(x[1]); };
    ic.oracle = [](double t, const Point& x) { return pulse_solution(t, x[1]); };
  }
  return ic;
}

std::shared_ptr<const FoliatedMesh> Scenario::build_mesh() const {
  MeshOptions o;
  o.quadrature_points = params.quadrature_points;
  o.num_slabs = params.slabs;
  if (dimension == 1) {
    return std::make_shared<const FoliatedMesh>(
        build_mesh_1d(params.cells, params.cfl, params.T, flux, motion, o));
  }
  return std::make_shared<const FoliatedMesh>(
      build_mesh_2d_torus(params.cells, params.cells, params.cfl, params.T, flux, o));
}

RefinementConfig Scenario::refinement() const {
  RefinementConfig r;
  r.dimension = dimension;
  r.base_cells = params.cells;
  r.cfl_fraction = params.cfl;
  r.T = params.T;
  r.flux = flux;
  r.motion = motion;
  r.options.quadrature_points = params.quadrature_points;
  r.options.num_slabs = params.slabs;
  return r;
}

std::vector<std::string> scenario_registry() {
  return {"flat-burgers-1d", "variable-density-1d", "moving-mesh-burgers-1d", "torus-advection-2d"};
}

Scenario make_scenario(const std::string& id, ScenarioParams p) {
  Scenario s;
  s.id = id;
  auto defaults = [&p](int cells, double T, const char* initial, double motion) {
    if (p.cells <= 0) p.cells = cells;
    if (p.T <= 0.0) p.T = T;
    if (p.initial.empty()) p.initial = initial;
    if (p.motion_amplitude < 0.0) p.motion_amplitude = motion;
  };
  if (id == "flat-burgers-1d") {
    s.description = "Burgers on [0,T] x S^1, static uniform mesh";
    s.flux = burgers_flux();
    s.initial_ids = {"pulse", "sine", "constant", "random-step"};
    defaults(100, 0.5, "pulse", 0.0);
    if (p.motion_amplitude > 0.0) throw ConfigError("flat-burgers-1d uses a static mesh");
  } else if (id == "variable-density-1d") {
    s.description = "d_t((1 + sin(2 pi x)/2) u) + d_x(0.8 u) = 0, closed potential-built field";
    s.flux = density_flux();
    s.initial_ids = {"sine", "constant", "random-step"};
    defaults(100, 0.5, "sine", 0.0);
  } else if (id == "moving-mesh-burgers-1d") {
    s.description = "Burgers on [0,T] x S^1 with nodes moving at 0.1 sin(2 pi x)";
    s.flux = burgers_flux();
    s.initial_ids = {"pulse", "sine", "constant", "random-step"};
    defaults(50, 0.5, "pulse", 0.1);
  } else if (id == "torus-advection-2d") {
    s.description = "d_t u + a d_x u + b d_y u = 0 on [0,T] x T^2";
    s.dimension = 2;
    s.flux = advection_flux(p.advection_a, p.advection_b);
    s.initial_ids = {"sine", "constant", "random-step"};
    s.default_scheme = SchemeKind::lax_friedrichs;
    defaults(16, 0.1, "sine", 0.0);
    if (p.motion_amplitude > 0.0) throw ConfigError("torus-advection-2d uses a static mesh");
  } else {
    std::string list;
    for (const auto& r : scenario_registry()) list += "\n  " + r;
    throw ConfigError("unknown scenario '" + id + "'; registered scenarios:" + list);
  }
  if (!(p.T > 0.0)) throw ConfigError("scenario T must be positive");
  if (!(p.cfl > 0.0 && p.cfl < 1.0)) throw ConfigError("cfl fraction must lie in (0, 1)");
  if (p.motion_amplitude > 0.0) s.motion = sine_motion(p.motion_amplitude);
  s.params = p;
  return s;
}

}  // namespace stfv
