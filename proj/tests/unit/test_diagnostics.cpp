#include <doctest.h>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "stfv/diagnostics.hpp"
#include "stfv/errors.hpp"
#include "stfv/experiments.hpp"
#include "stfv/scenarios.hpp"

using namespace stfv;
using namespace testing;

namespace {

Trajectory run_recorded(std::shared_ptr<const FoliatedMesh> m, const InitialData& u0,
                        SchemeKind kind = SchemeKind::godunov) {
  SolverConfig cfg;
  cfg.record_intermediates = true;
  return run(m, TotalFluxScheme(kind, m->flux().u_range()), u0, cfg);
}

Trajectory run_recorded(const Scenario& sc, const InitialData& u0,
                        SchemeKind kind = SchemeKind::godunov) {
  return run_recorded(sc.build_mesh(), u0, kind);
}

Scenario flat(int cells, double T) {
  ScenarioParams p;
  p.cells = cells;
  p.T = T;
  return make_scenario("flat-burgers-1d", p);
}

std::vector<Entropy> entropies() {
  return {ConvexEntropy::quadratic(), KruzkovEntropy{-0.5}, KruzkovEntropy{0.0},
          KruzkovEntropy{0.5}};
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("constant state: residuals vanish and the balance is an equality") {
  for (const auto& id : scenario_registry()) {
    const Scenario sc = make_scenario(id);
    const Trajectory t = run_recorded(sc, [](const Point&) { return 0.35; });
    for (const Entropy& e : entropies()) {
      const EntropyFluxField ent(sc.flux, e);
      const EntropyResidualSweeps sw = sweep_entropy_residuals(t, ent, "c");
      CHECK(sw.face.pass());
      CHECK(sw.element.pass());
      CHECK(std::abs(sw.face.max_value) <= 1e-12);
      CHECK(std::abs(sw.element.max_value) <= 1e-12);
    }
    const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
    const ConvexityEstimate cv = estimate_convexity(t, q);
    const BalanceTable table = make_balance_table(t, q, cv);
    const BalanceResult b = entropy_balance(table, 0, t.mesh().num_slabs(), cv.beta);
    CHECK(b.pass);
    CHECK(b.dissipation <= 1e-24);
    CHECK(std::abs(b.lhs - b.rhs) <= 1e-12 * (1.0 + std::abs(b.rhs)));
    CHECK(dissipation_estimate(t, [](const Point&) { return 0.35; }).lhs_sum <= 1e-24);
  }
}

TEST_CASE("residual queries need recorded intermediates") {
  const Scenario sc = flat(20, 0.2);
  const auto m = sc.build_mesh();
  const Trajectory t = run(m, TotalFluxScheme(SchemeKind::godunov, sc.flux->u_range()),
                           sc.initial().u0);
  const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
  CHECK_THROWS_AS(face_entropy_residual(t, 0, 0, 0, q), ConfigError);
  CHECK_NOTHROW(element_entropy_residual(t, 0, 0, q));
  CHECK_THROWS_AS(global_inequality_terms(t, default_test_functions(1, 0.1)[0], q), ConfigError);
}

TEST_CASE("shock run: entropy inequalities hold and dissipate") {
  const Scenario sc = flat(100, 0.5);
  for (SchemeKind kind : {SchemeKind::godunov, SchemeKind::lax_friedrichs}) {
    const Trajectory t = run_recorded(sc, sc.initial().u0, kind);
    for (const Entropy& e : entropies()) {
      const EntropyFluxField ent(sc.flux, e);
      const EntropyResidualSweeps sw = sweep_entropy_residuals(t, ent, entropy_name(e));
      CHECK_MESSAGE(sw.face.pass(), entropy_name(e));
      CHECK_MESSAGE(sw.element.pass(), entropy_name(e));
      CHECK(sw.face.checked == 100L * 2 * t.mesh().num_slabs());
      CHECK(sw.element.checked == 100L * t.mesh().num_slabs());
    }
    const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
    const ConvexityEstimate cv = estimate_convexity(t, q);
    CHECK(near(cv.beta, 1.0, 1e-6));
    CHECK(near(cv.c_lower, 1.0, 1e-12));
    const BalanceTable table = make_balance_table(t, q, cv);
    const int N = t.mesh().num_slabs();
    const BalanceResult b = entropy_balance(table, 0, N - 1, cv.beta);
    CHECK(b.pass);
    CHECK(b.dissipation > 0.0);
    CHECK(entropy_balance_local(table, 0, N - 1).pass);
    const BalanceResult same = entropy_balance(table, 7, 7, cv.beta);
    CHECK(same.lhs == same.rhs);
    CHECK(same.dissipation == 0.0);
    CHECK_THROWS_AS(entropy_balance(table, 5, 4, cv.beta), DomainError);
    CHECK_THROWS_AS(entropy_balance(table, 0, N + 1, cv.beta), DomainError);
    const BalanceResult direct = entropy_balance(t, 0, N - 1, q, cv.beta);
    CHECK(near(direct.lhs, b.lhs, 1e-14));
    CHECK(near(direct.dissipation, b.dissipation, 1e-14));
    CHECK(dissipation_estimate(t, sc.initial().u0).lhs_sum > 0.0);
  }
}

TEST_CASE("element residuals telescope to the slice entropy change") {
  for (const auto& id : scenario_registry()) {
    const Scenario sc = make_scenario(id);
    const Trajectory t = run_recorded(sc, sc.initial("random-step", 4).u0);
    const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
    const BalanceTable table = make_balance_table(t, q, estimate_convexity(t, q));
    for (int s = 0; s < t.mesh().num_slabs(); s += 5) {
      double sum = 0.0;
      for (int k = 0; k < t.mesh().num_cells(); ++k) sum += element_entropy_residual(t, s, k, q).value;
      const double change = table.slice_entropy[s + 1] - table.slice_entropy[s];
      CHECK(near(sum, change, 1e-12 * (1.0 + std::abs(table.slice_entropy[s]))));
    }
  }
}

TEST_CASE("degenerate beta is flagged and replaced by zero") {
  const Scenario sc = flat(20, 0.2);
  const Trajectory t = run_recorded(sc, sc.initial().u0);
  const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
  const BalanceTable table = make_balance_table(t, q, estimate_convexity(t, q));
  const BalanceResult b = entropy_balance(table, 0, 5, -1.0);
  CHECK(b.degenerate_beta);
  CHECK(b.dissipation == 0.0);
  CHECK(b.pass);
}

TEST_CASE("initial entropy scales quadratically with the amplitude") {
  const Scenario sc = flat(40, 0.1);
  const Trajectory t = run_recorded(sc, [](const Point&) { return 0.0; });
  auto wave = [](double a) { return [a](const Point& x) { return a * std::sin(2 * kPi * x[1]); }; };
  const double e1 = dissipation_estimate(t, wave(0.2)).initial_entropy;
  const double e2 = dissipation_estimate(t, wave(0.4)).initial_entropy;
  // int_0^1 (a sin)^2 / 2 = a^2 / 4.
  CHECK(near(e1, 0.01, 1e-10));
  CHECK(near(e2, 4.0 * e1, 1e-12));
}

TEST_CASE("contraction distance is a symmetric L1-type distance") {
  const Scenario sc = make_scenario("variable-density-1d");
  const auto m = sc.build_mesh();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-0.9, 0.9);
  auto random_state = [&] {
    SliceState s{0, 0.0, std::vector<double>(m->num_cells())};
    for (double& u : s.u) u = d(rng);
    return s;
  };
  for (int i = 0; i < 20; ++i) {
    const SliceState a = random_state();
    const SliceState b = random_state();
    const SliceState c = random_state();
    CHECK(contraction_distance(*m, a, a) == 0.0);
    CHECK(contraction_distance(*m, a, b) == contraction_distance(*m, b, a));
    CHECK(contraction_distance(*m, a, b) > 0.0);
    CHECK(contraction_distance(*m, a, c) <=
          contraction_distance(*m, a, b) + contraction_distance(*m, b, c) + 1e-12);
  }
  SliceState other = random_state();
  other.slab = 1;
  CHECK_THROWS_AS(contraction_distance(*m, random_state(), other), DomainError);
  SliceState shorter{0, 0.0, {0.1, 0.2}};
  CHECK_THROWS_AS(contraction_distance(*m, random_state(), shorter), DomainError);

  const auto fm = flat(25, 0.1).build_mesh();
  const SliceState ua{0, 0.0, std::vector<double>(25, 0.3)};
  const SliceState ub{0, 0.0, std::vector<double>(25, -0.45)};
  CHECK(near(contraction_distance(*fm, ua, ub), 0.75 * 1.0, 1e-14));
}

TEST_CASE("contraction along a trajectory pair") {
  const Scenario sc = flat(50, 0.4);
  const auto m = sc.build_mesh();
  const Trajectory a = run_recorded(m, sc.initial("random-step", 21).u0);
  const Trajectory b = run_recorded(m, sc.initial("random-step", 22).u0);
  const std::vector<double> d = contraction_series(a, b);
  REQUIRE(d.size() == a.states().size());
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] <= d[i - 1] + 1e-10 * (1.0 + d[i - 1]));
  CHECK(d.back() < d.front());
}

TEST_CASE("bump test functions") {
  const TestFunction psi(1, 0.3, {0.9, 0.0}, 0.2);
  CHECK(psi(pt(0.0, 0.9)) == 1.0);
  CHECK(psi(pt(0.3, 0.9)) == 0.0);
  CHECK(psi(pt(0.1, 0.5)) == 0.0);
  // Periodic: the support wraps across x = 0.
  CHECK(psi(pt(0.1, 0.05)) > 0.0);
  CHECK(psi(pt(0.1, 0.05)) == doctest::Approx(psi(pt(0.1, 1.05))).epsilon(1e-14));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Point x = pt(0.35 * d(rng), d(rng));
    CHECK(psi(x) >= 0.0);
    const Point g = psi.gradient(x);
    for (int a = 0; a < 2; ++a) {
      Point xp = x;
      Point xm = x;
      const double h = 1e-6;
      xp[a] += h;
      xm[a] -= h;
      if (x[0] < h) continue;
      CHECK(near(g[a], (psi(xp) - psi(xm)) / (2 * h), 1e-5 * (1.0 + std::abs(g[a]))));
    }
  }
  CHECK(psi.vanishes_on_box({0.3, 0.0}, {0.6, 0.0}));
  CHECK_FALSE(psi.vanishes_on_box({0.0, 0.0}, {0.1, 0.0}));
  CHECK_FALSE(psi.vanishes_on_box({1.6, 0.0}, {1.75, 0.0}));

  const TestFunction psi2(2, 0.05, {0.3, 0.4}, 0.25);
  CHECK(psi2(pt(0.0, 0.3, 0.4)) == 1.0);
  CHECK(psi2(pt(0.0, 0.3, 0.8)) == 0.0);
  CHECK(psi2.vanishes_on_box({0.0, 0.7}, {1.0, 0.9}));

  CHECK_THROWS_AS(TestFunction(1, 0.0, {0.5, 0.0}, 0.2), ConfigError);
  CHECK_THROWS_AS(TestFunction(1, 0.2, {0.5, 0.0}, 0.6), ConfigError);
  const auto m = flat(20, 0.2).build_mesh();
  CHECK_THROWS_AS(TestFunction(1, 0.2, {0.5, 0.0}, 0.2).check_support(*m), DomainError);
  CHECK_NOTHROW(TestFunction(1, 0.1, {0.5, 0.0}, 0.2).check_support(*m));
}

TEST_CASE("global inequality terms") {
  SUBCASE("constant state") {
    const Scenario sc = flat(40, 0.3);
    const Trajectory t = run_recorded(sc, [](const Point&) { return 0.6; });
    const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
    for (const TestFunction& psi : default_test_functions(1, 0.3)) {
      const GlobalInequalityTerms g = global_inequality_terms(t, psi, q);
      CHECK(g.lhs <= 1e-10);
      CHECK(std::abs(g.A) <= 1e-12);
      CHECK(std::abs(g.B) <= 1e-12);
      CHECK(std::abs(g.C) <= 1e-12);
      CHECK(g.pass());
    }
  }
  SUBCASE("shock run") {
    const Scenario sc = flat(80, 0.5);
    const Trajectory t = run_recorded(sc, sc.initial().u0);
    const EntropyFluxField q(sc.flux, ConvexEntropy::quadratic());
    for (const TestFunction& psi : default_test_functions(1, 0.5)) {
      const GlobalInequalityTerms g = global_inequality_terms(t, psi, q);
      CHECK(g.pass());
      CHECK(std::isfinite(g.lhs));
    }
  }
}

TEST_CASE("diagnostic rows CSV") {
  std::ostringstream os;
  write_diagnostic_rows_csv({{"face_quadratic", 3, 7, -1.5e-3, 1e-9, true}}, os);
  CHECK(os.str() == "kind,slab,element,value,threshold,pass\nface_quadratic,3,7,-0.0015,1.0000000000000001e-09,1\n");
}

}  // TEST_SUITE
