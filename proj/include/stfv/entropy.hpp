#pragma once

// Entropy pairs (U, Omega) attached to a flux field. Omega^alpha(u, x) is the primitive
// int_0^u U'(v) d_u omega^alpha(v, x) dv, so Omega(0) = 0.

#include <functional>
#include <memory>
#include <string>
#include <variant>

#include "stfv/forms.hpp"

namespace stfv {

struct KruzkovEntropy {
  double c = 0.0;
};

struct ConvexEntropy {
  std::function<double(double)> U;
  std::function<double(double)> dU;
  std::function<double(double)> d2U;
  std::string name = "convex";

  static ConvexEntropy quadratic();
};

using Entropy = std::variant<KruzkovEntropy, ConvexEntropy>;

std::string entropy_name(const Entropy& entropy);

class EntropyFluxField {
 public:
  /// Throws ConfigError when U fails the sampled convexity check on the flux's state range.
  EntropyFluxField(std::shared_ptr<const FluxField> base, Entropy entropy);

  const FluxField& base() const { return *base_; }
  const Entropy& entropy() const { return entropy_; }
  /// Omega as a flux field; usable with FaceQuadrature::flux.
  const FluxField& form() const { return form_; }

  double U(double u) const;
  double dU(double u) const;
  double component(int alpha, double u, const Point& x) const { return form_.component(alpha, u, x); }
  double component_du(int alpha, double u, const Point& x) const {
    return form_.component_du(alpha, u, x);
  }

 private:
  std::shared_ptr<const FluxField> base_;
  Entropy entropy_;
  FluxField form_;
};

EntropyFluxField entropy_flux_from_U(std::shared_ptr<const FluxField> flux, ConvexEntropy U);

/// sgn(u - v) (omega^alpha(u, x) - omega^alpha(v, x)).
double kruzkov_entropy_form(const FluxField& flux, double u, double v, int alpha, const Point& x);

/// Integral of the Kruzkov form over a face: sgn(u - v) (F(u) - F(v)) with F the face pullback.
double kruzkov_face_integral(const FluxField& flux, const FaceQuadrature& face, double u, double v);

}  // namespace stfv
