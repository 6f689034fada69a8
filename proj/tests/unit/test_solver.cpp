#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "helpers.hpp"
#include "stfv/entropy.hpp"
#include "stfv/errors.hpp"
#include "stfv/scenarios.hpp"
#include "stfv/solver.hpp"

using namespace stfv;
using namespace testing;

namespace {

std::shared_ptr<const FluxField> burgers() { return make_scenario("flat-burgers-1d").flux; }

std::shared_ptr<const FoliatedMesh> flat_mesh(int cells, double T, std::optional<int> slabs = {},
                                              double cfl = 0.5) {
  MeshOptions o;
  o.num_slabs = slabs;
  return std::make_shared<const FoliatedMesh>(build_mesh_1d(cells, cfl, T, burgers(), {}, o));
}

double upper_average(const FluxField& field, const FoliatedMesh& m, int s, int k, double u) {
  return pullback_integral(field, m.upper_face(s, k), u, m.quadrature()) / m.e_plus(s, k);
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("solver configuration bounds") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.inversion_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.inversion_tol = 1e-5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.inversion_tol = 1e-6;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("projection of constant data on every scenario") {
  for (const auto& id : scenario_registry()) {
    const auto m = make_scenario(id).build_mesh();
    const ProjectionResult p = project_initial_data(*m, [](const Point&) { return 0.4; });
    CHECK(p.warnings.empty());
    for (double u : p.state.u) CHECK(near(u, 0.4, 1e-12));
  }
}

TEST_CASE("projection of sin(2 pi x) gives cell averages") {
  const auto m = flat_mesh(10, 0.1);
  const ProjectionResult p =
      project_initial_data(*m, [](const Point& x) { return std::sin(2 * kPi * x[1]); });
  for (int k = 0; k < 10; ++k) {
    const auto e = m->slice_face(0, k);
    const auto c = e.corners();
    const double a = c[0][1];
    const double b = c[1][1];
    const double avg = (std::cos(2 * kPi * a) - std::cos(2 * kPi * b)) / (2 * kPi * (b - a));
    CHECK(near(p.state.u[k], avg, 1e-8));
  }
  const auto e0 = m->slice_face(0, 0);
  if (near(e0.corners()[0][1], 0.0, 1e-15)) CHECK(near(p.state.u[0], 0.30396, 5e-6));
}

TEST_CASE("projection rejects data outside the state range") {
  const auto m = flat_mesh(10, 0.1);
  CHECK_THROWS_AS(project_initial_data(*m, [](const Point&) { return 1.5; }), InversionRangeError);
}

TEST_CASE("single element updates against the flat finite volume formula") {
  // dx = 0.1, tau = 0.025, Godunov: u+ = u - (tau/dx) (f*(u, u_r) - f*(u_l, u)).
  const auto m = flat_mesh(10, 0.025, 1, 0.6);
  REQUIRE(near(m->tau_max(), 0.025, 1e-15));
  const TotalFluxScheme god(SchemeKind::godunov, m->flux().u_range());
  const int k = 4;
  int left = -1;
  int right = -1;
  for (const FaceRef& r : m->cell(k).faces) {
    const auto e = m->vertical_face(0, r.face);
    const double x = e.corners()[0][1];
    const auto own = m->slice_face(0, k);
    (near(x, own.corners()[0][1], 1e-15) ? left : right) = r.neighbor;
  }
  REQUIRE(left >= 0);
  REQUIRE(right >= 0);
  SliceState s{0, 0.0, std::vector<double>(10, 0.0)};
  s.u[left] = 1.0;
  CHECK(near(step_element(*m, 0, k, s, god, {}).u_plus, 0.25 * 0.5, 1e-12));
  s.u[k] = 1.0;
  CHECK(near(step_element(*m, 0, k, s, god, {}).u_plus, 1.0, 1e-12));
  std::fill(s.u.begin(), s.u.end(), -0.35);
  CHECK(near(step_element(*m, 0, k, s, god, {}).u_plus, -0.35, 1e-12));
}

TEST_CASE("constant states are preserved on every scenario") {
  for (const auto& id : scenario_registry()) {
    const Scenario sc = make_scenario(id);
    const auto m = sc.build_mesh();
    const TotalFluxScheme scheme(sc.default_scheme, sc.flux->u_range());
    const Trajectory t = run(m, scheme, [](const Point&) { return -0.25; });
    for (const SliceState& s : t.states()) {
      for (double u : s.u) CHECK(near(u, -0.25, 1e-12));
    }
  }
}

TEST_CASE("conservation, maximum principle and convex decomposition") {
  for (const auto& id : scenario_registry()) {
    const Scenario sc = make_scenario(id);
    const auto m = sc.build_mesh();
    for (SchemeKind kind : {SchemeKind::lax_friedrichs, SchemeKind::godunov}) {
      const TotalFluxScheme scheme(kind, sc.flux->u_range());
      SolverConfig cfg;
      cfg.record_intermediates = true;
      const Trajectory t = run(m, scheme, sc.initial("random-step", 9).u0, cfg);
      const double total0 = slice_total(*m, 0, t.state(0).u);
      double lo = *std::min_element(t.state(0).u.begin(), t.state(0).u.end());
      double hi = *std::max_element(t.state(0).u.begin(), t.state(0).u.end());
      const EntropyFluxField quad(sc.flux, ConvexEntropy::quadratic());
      const EntropyFluxField kruz(sc.flux, KruzkovEntropy{0.1});
      for (int s = 0; s < m->num_slabs(); ++s) {
        const auto& next = t.state(s + 1).u;
        CHECK(std::abs(slice_total(*m, s + 1, next) - total0) <= 1e-12 * (1.0 + std::abs(total0)));
        const double nlo = *std::min_element(next.begin(), next.end());
        const double nhi = *std::max_element(next.begin(), next.end());
        CHECK(nlo >= lo - 1e-12);
        CHECK(nhi <= hi + 1e-12);
        lo = nlo;
        hi = nhi;
        if (s % 7 != 0) continue;
        for (int k = 0; k < m->num_cells(); ++k) {
          const int nk = static_cast<int>(m->cell(k).faces.size());
          double mean = 0.0;
          double mean_q = 0.0;
          double mean_k = 0.0;
          for (int j = 0; j < nk; ++j) {
            const double ut = t.intermediate(s, k, j);
            mean += upper_average(*sc.flux, *m, s, k, ut) / nk;
            mean_q += upper_average(quad.form(), *m, s, k, ut) / nk;
            mean_k += upper_average(kruz.form(), *m, s, k, ut) / nk;
          }
          const double up = t.u_plus(s, k);
          CHECK(near(upper_average(*sc.flux, *m, s, k, up), mean, 2e-12 * (1.0 + std::abs(mean))));
          CHECK(upper_average(quad.form(), *m, s, k, up) <= mean_q + 1e-10);
          CHECK(upper_average(kruz.form(), *m, s, k, up) <= mean_k + 1e-10);
        }
      }
    }
  }
}

TEST_CASE("runs are deterministic") {
  const Scenario sc = make_scenario("moving-mesh-burgers-1d");
  const TotalFluxScheme scheme(SchemeKind::godunov, sc.flux->u_range());
  const Trajectory a = run(sc.build_mesh(), scheme, sc.initial().u0);
  const Trajectory b = run(sc.build_mesh(), scheme, sc.initial().u0);
  REQUIRE(a.states().size() == b.states().size());
  for (std::size_t i = 0; i < a.states().size(); ++i) CHECK(a.state(i).u == b.state(i).u);
}

TEST_CASE("intermediates must be recorded to be read") {
  const auto m = flat_mesh(10, 0.1);
  const Trajectory t = run(m, TotalFluxScheme(SchemeKind::godunov, m->flux().u_range()),
                           [](const Point&) { return 0.1; });
  CHECK_FALSE(t.has_intermediates());
  CHECK_THROWS_AS(t.intermediate(0, 0, 0), ConfigError);
}

TEST_CASE("reconstruction") {
  const auto m = flat_mesh(10, 0.2);
  const TotalFluxScheme god(SchemeKind::godunov, m->flux().u_range());
  const Trajectory t = run(m, god, [](const Point& x) { return x[1] < 0.5 ? 0.8 : -0.2; });
  const auto& times = m->slice_times();
  const auto e3 = m->slice_face(0, 3);
  const double mid = 0.5 * (e3.corners()[0][1] + e3.corners()[1][1]);
  const double between = 0.5 * (times[1] + times[2]);
  CHECK(reconstruct(t, between, pt(between, mid)) == t.u_minus(1, 3));
  // On a slice time the prism above is used.
  CHECK(reconstruct(t, times[2], pt(times[2], mid)) == t.u_minus(2, 3));
  CHECK(reconstruct(t, times.back(), pt(times.back(), mid)) == t.states().back().u[3]);
  // On a shared vertex the smaller element id wins.
  const double x_shared = e3.corners()[1][1];
  int right = -1;
  for (int k = 0; k < m->num_cells(); ++k) {
    const auto e = m->slice_face(0, k);
    if (e.corners()[0][1] == x_shared) right = k;
  }
  REQUIRE(right >= 0);
  CHECK(reconstruct(t, between, pt(between, x_shared)) == t.u_minus(1, std::min(3, right)));
  CHECK_THROWS_AS(reconstruct(t, -0.1, pt(-0.1, 0.5)), DomainError);
  CHECK_THROWS_AS(reconstruct(t, times.back() + 1e-9, pt(0.0, 0.5)), DomainError);
}

TEST_CASE("trajectory and intermediates CSV layout") {
  const auto m = flat_mesh(10, 0.1);
  SolverConfig cfg;
  cfg.record_intermediates = true;
  const Trajectory t = run(m, TotalFluxScheme(SchemeKind::godunov, m->flux().u_range()),
                           [](const Point& x) { return std::sin(2 * kPi * x[1]); }, cfg);
  std::ostringstream a;
  write_trajectory_csv(t, a);
  std::istringstream in(a.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "slab,time,element,u");
  std::getline(in, line);
  CHECK(line.rfind("0,0,0,", 0) == 0);
  const std::string text = a.str();
  const long lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == 1 + static_cast<long>(t.states().size()) * 10);
  std::ostringstream b;
  write_intermediates_csv(t, b);
  const std::string inter = b.str();
  CHECK(inter.rfind("slab,element,face,u_tilde\n", 0) == 0);
  CHECK(std::count(inter.begin(), inter.end(), '\n') == 1 + m->num_slabs() * 10 * 2);
}

}  // TEST_SUITE
