#include "stfv/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stfv/errors.hpp"

namespace stfv {

namespace {

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

const QuadratureRule& panel_rule() {
  static const QuadratureRule rule = QuadratureRule::gauss_legendre(20);
  return rule;
}

// int_0^u g(v) dv by composite Gauss-Legendre with panels no wider than 0.5.
template <class G>
double primitive_from_zero(double u, G&& g) {
  if (u == 0.0) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(u) / 0.5)));
  const double width = u / panels;
  const QuadratureRule& rule = panel_rule();
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = p * width;
    double panel = 0.0;
    for (int k = 0; k < rule.points_per_axis(); ++k) {
      panel += rule.weights()[k] * g(a + rule.nodes()[k] * width);
    }
    total += panel * width;
  }
  return total;
}

void check_convex(const ConvexEntropy& e, const StateRange& range) {
  constexpr int n = 128;
  const double h = range.width() / (n - 1);
  for (int k = 1; k + 1 < n; ++k) {
    const double u = range.lo + k * h;
    const double d2 = (e.U(u + h) - 2.0 * e.U(u) + e.U(u - h)) / (h * h);
    if (d2 < -1e-10) {
      std::ostringstream os;
      os << "entropy '" << e.name << "' is not convex near u=" << u << " (second difference "
         << d2 << ")";
      throw ConfigError(os.str());
    }
  }
}

FluxField make_form(const std::shared_ptr<const FluxField>& base, const Entropy& entropy) {
  const std::string name = base->name() + "/" + entropy_name(entropy);
  if (const auto* k = std::get_if<KruzkovEntropy>(&entropy)) {
    const double c = k->c;
    FluxField form(
        base->dimension(),
        [base, c](int a, double u, const Point& x) {
          return sgn(u - c) * (base->component(a, u, x) - base->component(a, c, x));
        },
        [base, c](int a, double u, const Point& x) { return sgn(u - c) * base->component_du(a, u, x); },
        base->u_range(), base->geometry_compatible(), name);
    form.set_position_independent(base->position_independent());
    return form;
  }
  const auto& e = std::get<ConvexEntropy>(entropy);
  check_convex(e, base->u_range());
  auto dU = e.dU;
  FluxField form(
      base->dimension(),
      [base, dU](int a, double u, const Point& x) {
        return primitive_from_zero(u, [&](double v) { return dU(v) * base->component_du(a, v, x); });
      },
      [base, dU](int a, double u, const Point& x) { return dU(u) * base->component_du(a, u, x); },
      base->u_range(), base->geometry_compatible(), name);
  form.set_position_independent(base->position_independent());
  return form;
}

}  // namespace

ConvexEntropy ConvexEntropy::quadratic() {
  return ConvexEntropy{[](double u) { return 0.5 * u * u; }, [](double u) { return u; },
                       [](double) { return 1.0; }, "quadratic"};
}

std::string entropy_name(const Entropy& entropy) {
  if (const auto* k = std::get_if<KruzkovEntropy>(&entropy)) {
    std::ostringstream os;
    os << "kruzkov(" << k->c << ")";
    return os.str();
  }
  return std::get<ConvexEntropy>(entropy).name;
}

EntropyFluxField::EntropyFluxField(std::shared_ptr<const FluxField> base, Entropy entropy)
    : base_(std::move(base)), entropy_(std::move(entropy)), form_(make_form(base_, entropy_)) {}

double EntropyFluxField::U(double u) const {
  if (const auto* k = std::get_if<KruzkovEntropy>(&entropy_)) return std::abs(u - k->c);
  return std::get<ConvexEntropy>(entropy_).U(u);
}

double EntropyFluxField::dU(double u) const {
  if (const auto* k = std::get_if<KruzkovEntropy>(&entropy_)) return sgn(u - k->c);
  return std::get<ConvexEntropy>(entropy_).dU(u);
}

EntropyFluxField entropy_flux_from_U(std::shared_ptr<const FluxField> flux, ConvexEntropy U) {
  return EntropyFluxField(std::move(flux), Entropy{std::move(U)});
}

double kruzkov_entropy_form(const FluxField& flux, double u, double v, int alpha, const Point& x) {
  return sgn(u - v) * (flux.component(alpha, u, x) - flux.component(alpha, v, x));
}

double kruzkov_face_integral(const FluxField& flux, const FaceQuadrature& face, double u, double v) {
  if (u == v) return 0.0;
  return sgn(u - v) * (face.flux(flux, u) - face.flux(flux, v));
}

}  // namespace stfv
