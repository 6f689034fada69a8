#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "stfv/entropy.hpp"
#include "stfv/errors.hpp"
#include "stfv/scenarios.hpp"

using namespace stfv;
using namespace testing;

TEST_SUITE("forms") {

TEST_CASE("gauss-legendre rule: positive weights, unit sum, polynomial exactness") {
  for (int q : {1, 2, 3, 5, 8}) {
    const QuadratureRule rule = QuadratureRule::gauss_legendre(q);
    double sum = 0.0;
    for (double w : rule.weights()) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(near(sum, 1.0, 1e-14));
    for (int k = 0; k <= rule.exact_degree(); ++k) {
      double integral = 0.0;
      for (int i = 0; i < q; ++i) integral += rule.weights()[i] * std::pow(rule.nodes()[i], k);
      CHECK(near(integral, 1.0 / (k + 1), 1e-14));
    }
  }
}

TEST_CASE("face measure") {
  const QuadratureRule quad = QuadratureRule::gauss_legendre(5);
  SUBCASE("identity density on an interval of length 0.25") {
    const auto f = field_1d([](int a, double u, const Point&) { return a == 0 ? u : 0.0; },
                            [](int a, double, const Point&) { return a == 0 ? 1.0 : 0.0; });
    CHECK(near(face_measure(*f, interval(0.0, 0.3, 0.55), quad), 0.25, 1e-15));
  }
  SUBCASE("variable density over the full circle") {
    const auto f = field_1d(
        [](int a, double u, const Point& x) { return a == 0 ? u * (1.0 + 0.5 * std::sin(2 * kPi * x[1])) : 0.0; },
        [](int a, double, const Point& x) { return a == 0 ? 1.0 + 0.5 * std::sin(2 * kPi * x[1]) : 0.0; });
    CHECK(near(face_measure(*f, interval(0.2, 0.0, 1.0), quad), 1.0, 1e-12));
  }
  SUBCASE("vanishing derivative at zero is degenerate") {
    const auto f = field_1d([](int a, double u, const Point&) { return a == 0 ? u * u * u : 0.0; },
                            [](int a, double u, const Point&) { return a == 0 ? 3 * u * u : 0.0; });
    CHECK_THROWS_AS(face_measure(*f, interval(0.0, 0.1, 0.4), quad), DegenerateFaceError);
  }
}

TEST_CASE("averaged flux") {
  const QuadratureRule quad = QuadratureRule::gauss_legendre(5);
  const auto identity = field_1d([](int a, double u, const Point&) { return a == 0 ? u : 0.0; },
                                 [](int a, double, const Point&) { return a == 0 ? 1.0 : 0.0; },
                                 {-2.0, 2.0});
  CHECK(near(averaged_flux(*identity, interval(0.0, 0.1, 0.7), 0.3, quad), 0.3, 1e-15));
  CHECK(near(averaged_flux(*identity, interval(0.0, 0.1, 0.7), -1.7, quad), -1.7, 1e-15));

  const auto density = field_1d(
      [](int a, double u, const Point& x) { return a == 0 ? u * (1.0 + 0.5 * std::sin(2 * kPi * x[1])) : 0.0; },
      [](int a, double, const Point& x) { return a == 0 ? 1.0 + 0.5 * std::sin(2 * kPi * x[1]) : 0.0; });
  for (double b : {0.13, 0.4, 0.77}) {
    CHECK(near(averaged_flux(*density, interval(0.0, 0.05, b), 0.5, quad), 0.5, 1e-14));
  }
}

TEST_CASE("inversion of the averaged flux") {
  const QuadratureRule quad = QuadratureRule::gauss_legendre(5);
  const auto identity = field_1d([](int a, double u, const Point&) { return a == 0 ? u : 0.0; },
                                 [](int a, double, const Point&) { return a == 0 ? 1.0 : 0.0; });
  CHECK(near(invert_averaged_flux(*identity, interval(0.0, 0.0, 0.5), 0.3, 1e-12, quad), 0.3, 1e-12));

  const auto cubic = field_1d([](int a, double u, const Point&) { return a == 0 ? u + 0.1 * u * u * u : 0.0; },
                              [](int a, double u, const Point&) { return a == 0 ? 1.0 + 0.3 * u * u : 0.0; },
                              {-1.5, 1.5});
  const FacePatch e = interval(0.0, 0.2, 0.45);
  const double target = averaged_flux(*cubic, e, 1.0, quad);
  CHECK(near(target, 1.1, 1e-14));
  CHECK(near(invert_averaged_flux(*cubic, e, target, 1e-13, quad), 1.0, 1e-10));

  SUBCASE("target outside the widened state range") {
    CHECK_THROWS_AS(invert_averaged_flux(*cubic, e, 5.0, 1e-12, quad), InversionRangeError);
  }
}

TEST_CASE("round trip on 1000 random (face, state) pairs of the variable-density mesh") {
  const Scenario s = make_scenario("variable-density-1d", {.cells = 40});
  const auto mesh = s.build_mesh();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> slice(0, mesh->num_slabs());
  std::uniform_int_distribution<int> cell(0, mesh->num_cells() - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double tol = 1e-12;
  for (int i = 0; i < 1000; ++i) {
    const FacePatch e = mesh->slice_face(slice(rng), cell(rng));
    const double u_star = u(rng);
    const double target = averaged_flux(mesh->flux(), e, u_star, mesh->quadrature());
    // c_lower = 1 for this field.
    CHECK(near(invert_averaged_flux(mesh->flux(), e, target, tol, mesh->quadrature()), u_star, tol / 1.0 + 1e-14));
  }
}

TEST_CASE("orientation flips the pullback integral") {
  const QuadratureRule quad = QuadratureRule::gauss_legendre(5);
  const auto f = flat_burgers();
  for (double u : {-0.8, 0.1, 0.9}) {
    const FacePatch v = vertical(0.0, 0.05, 0.3);
    CHECK(pullback_integral(*f, v, u, quad) == -pullback_integral(*f, v.with_orientation(-1), u, quad));
    const FacePatch e = interval(0.0, 0.3, 0.4);
    CHECK(pullback_integral(*f, e, u, quad) == -pullback_integral(*f, e.with_orientation(-1), u, quad));
  }
}

TEST_CASE("pullback integral is additive over a split face") {
  const QuadratureRule quad = QuadratureRule::gauss_legendre(5);
  const auto poly = field_1d([](int a, double u, const Point& x) { return a == 0 ? u * (1 + x[1] * x[1] * x[1]) : u * x[0]; },
                             [](int a, double, const Point& x) { return a == 0 ? 1 + x[1] * x[1] * x[1] : x[0]; });
  // A tilted face split at its midpoint.
  const Point whole[2] = {pt(0.1, 0.2), pt(0.3, 0.5)};
  const Point left[2] = {pt(0.1, 0.2), pt(0.2, 0.35)};
  const Point right[2] = {pt(0.2, 0.35), pt(0.3, 0.5)};
  const FacePatch w(FaceKind::vertical, 1, whole);
  const FacePatch l(FaceKind::vertical, 1, left);
  const FacePatch r(FaceKind::vertical, 1, right);
  for (double u : {-0.5, 0.7}) {
    CHECK(near(pullback_integral(*poly, w, u, quad),
               pullback_integral(*poly, l, u, quad) + pullback_integral(*poly, r, u, quad), 1e-12));
  }
}

TEST_CASE("convex entropy flux fields") {
  const auto f = flat_burgers();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::uniform_real_distribution<double> xd(0.0, 1.0);

  SUBCASE("linear U reproduces omega") {
    const EntropyFluxField linear =
        entropy_flux_from_U(f, ConvexEntropy{[](double u) { return u; }, [](double) { return 1.0; },
                                             [](double) { return 0.0; }, "linear"});
    for (int i = 0; i < 50; ++i) {
      const double u = ud(rng);
      const Point x = pt(xd(rng), xd(rng));
      for (int a = 0; a < 2; ++a) CHECK(near(linear.component(a, u, x), f->component(a, u, x), 1e-14));
    }
  }
  SUBCASE("quadratic U on the identity density") {
    const EntropyFluxField q(f, ConvexEntropy::quadratic());
    for (double u : {-0.9, -0.2, 0.35, 1.0}) CHECK(near(q.component(0, u, pt(0, 0.4)), 0.5 * u * u, 1e-15));
  }
  SUBCASE("omega of zero vanishes and the derivative identity holds") {
    const auto density = make_scenario("variable-density-1d").flux;
    for (const auto& base : {f, density}) {
      const EntropyFluxField q(base, ConvexEntropy::quadratic());
      for (int i = 0; i < 50; ++i) {
        const double u = 0.9 * ud(rng);
        const Point x = pt(xd(rng), xd(rng));
        for (int a = 0; a < 2; ++a) {
          CHECK(q.component(a, 0.0, x) == 0.0);
          const double h = 1e-5;
          const double fd = (q.component(a, u + h, x) - q.component(a, u - h, x)) / (2 * h);
          CHECK(near(fd, u * base->component_du(a, u, x), 1e-8));
          CHECK(near(q.component_du(a, u, x), u * base->component_du(a, u, x), 1e-15));
        }
      }
    }
  }
  SUBCASE("non-convex U is rejected") {
    CHECK_THROWS_AS(EntropyFluxField(f, ConvexEntropy{[](double u) { return -u * u; },
                                                      [](double u) { return -2 * u; },
                                                      [](double) { return -2.0; }, "concave"}),
                    ConfigError);
  }
}

TEST_CASE("kruzkov entropy form") {
  const auto f = flat_burgers();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int a = 0; a < 2; ++a) CHECK(kruzkov_entropy_form(*f, 0.4, 0.4, a, pt(0, 0.2)) == 0.0);
  CHECK(kruzkov_entropy_form(*f, 1.0, 0.0, 0, pt(0, 0.2)) == 1.0);
  for (int i = 0; i < 100; ++i) {
    const double u = ud(rng);
    const double v = ud(rng);
    for (int a = 0; a < 2; ++a) {
      CHECK(kruzkov_entropy_form(*f, u, v, a, pt(0, 0.3)) == kruzkov_entropy_form(*f, v, u, a, pt(0, 0.3)));
    }
  }
}

TEST_CASE("closedness check") {
  std::vector<GeometryCheckSample> samples;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::uniform_real_distribution<double> xd(0.0, 1.0);
  for (int i = 0; i < 64; ++i) samples.push_back({ud(rng), pt(xd(rng), xd(rng))});

  const auto burgers = check_geometry_compatible(*flat_burgers(), samples, 1e-4);
  CHECK(burgers.pass);
  CHECK(burgers.max_residual == 0.0);

  const auto density = check_geometry_compatible(*make_scenario("variable-density-1d").flux, samples, 1e-4);
  CHECK(density.pass);
  CHECK(density.max_residual <= 1e-8);

  // omega^0 = u t is not closed: d omega = u.
  const auto open = field_1d([](int a, double u, const Point& x) { return a == 0 ? u * x[0] : 0.0; },
                             [](int a, double, const Point& x) { return a == 0 ? x[0] : 0.0; }, {-1.0, 1.0},
                             false);
  const auto rep = check_geometry_compatible(*open, samples, 1e-4);
  CHECK_FALSE(rep.pass);
  CHECK(near(rep.max_residual, std::abs(rep.worst.u), 1e-8));
}

TEST_CASE("component derivatives of every shipped flux match finite differences") {
  std::vector<GeometryCheckSample> samples;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::uniform_real_distribution<double> xd(0.0, 1.0);
  for (int i = 0; i < 64; ++i) samples.push_back({ud(rng), pt(xd(rng), xd(rng), xd(rng))});
  for (const auto& id : scenario_registry()) {
    CAPTURE(id);
    CHECK(check_flux_derivatives(*make_scenario(id).flux, samples).pass);
  }
}

TEST_CASE("evaluation errors name the component") {
  const auto bad = field_1d([](int a, double u, const Point&) { return a == 0 ? u : std::log(u); },
                            [](int a, double u, const Point&) { return a == 0 ? 1.0 : 1.0 / u; });
  const QuadratureRule quad = QuadratureRule::gauss_legendre(3);
  CHECK_THROWS_AS(pullback_integral(*bad, vertical(0.0, 0.1, 0.5), -0.5, quad), EvaluationError);
}

}  // TEST_SUITE
