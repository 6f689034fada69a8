#pragma once

// Parametrized n-form flux fields on chart coordinates x = (x^0 = t, x^1, ..., x^n)
// and quadrature of their pullbacks over multilinear face patches.
//
// A flux field is stored through its frame coefficients omega^alpha in
//   omega(u) = sum_alpha omega^alpha(u, x) (dx^0 ^ ... ^ dx^{alpha-1} ^ dx^{alpha+1} ^ ... ^ dx^n),
// so that d(omega(u)) = sum_alpha (-1)^alpha d_alpha omega^alpha dvol.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stfv {

/// Largest supported slice dimension n.
inline constexpr int kMaxSpaceDim = 3;
inline constexpr int kMaxChartDim = kMaxSpaceDim + 1;

/// Chart point (t, x^1, ..., x^n); unused trailing entries are zero.
using Point = std::array<double, kMaxChartDim>;

std::string to_string(const Point& x, int chart_dim);

/// Closed interval of admissible states.
struct StateRange {
  double lo = -1.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  bool contains(double u, double slack = 0.0) const { return u >= lo - slack && u <= hi + slack; }
  /// The range widened by `fraction` of its width on both sides.
  StateRange widened(double fraction) const {
    return {lo - fraction * width(), hi + fraction * width()};
  }
};

/// Tensor-product Gauss-Legendre rule on [0,1]^k.
class QuadratureRule {
 public:
  /// q-point rule per axis, exact through degree 2q-1.
  static QuadratureRule gauss_legendre(int q);

  int points_per_axis() const { return static_cast<int>(nodes_.size()); }
  int exact_degree() const { return 2 * points_per_axis() - 1; }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Function signature of a frame coefficient omega^alpha(u, x).
using ComponentFn = std::function<double(int alpha, double u, const Point& x)>;

class FluxField {
 public:
  FluxField(int dimension, ComponentFn component, ComponentFn component_du, StateRange range,
            bool geometry_compatible, std::string name = "flux");

  /// Builds the field from textbook data: density f^0 and spatial fluxes f^i of
  /// d_t f^0 + sum_i d_i f^i = 0. The frame coefficients are stored as (-1)^alpha f^alpha.
  static FluxField from_classical(int dimension, ComponentFn f, ComponentFn f_du, StateRange range,
                                  bool geometry_compatible, std::string name = "flux");

  int dimension() const { return dimension_; }
  int chart_dim() const { return dimension_ + 1; }
  const StateRange& u_range() const { return range_; }
  bool geometry_compatible() const { return geometry_compatible_; }
  const std::string& name() const { return name_; }
  /// Components that ignore x let face integrals collapse to one evaluation per frame.
  bool position_independent() const { return position_independent_; }
  FluxField& set_position_independent(bool value) {
    position_independent_ = value;
    return *this;
  }

  double component(int alpha, double u, const Point& x) const { return component_(alpha, u, x); }
  double component_du(int alpha, double u, const Point& x) const {
    return component_du_(alpha, u, x);
  }

 private:
  int dimension_;
  ComponentFn component_;
  ComponentFn component_du_;
  StateRange range_;
  bool geometry_compatible_;
  bool position_independent_ = false;
  std::string name_;
};

enum class FaceKind { spacelike, vertical };

/// Multilinear image of the reference cube [0,1]^n in chart coordinates.
///
/// Corner c has reference coordinates s_k = bit k of c. For vertical faces reference
/// axis 0 is mapped to the time direction.
class FacePatch {
 public:
  FacePatch(FaceKind kind, int space_dim, std::span<const Point> corners, int orientation_sign = 1);

  FaceKind kind() const { return kind_; }
  int space_dim() const { return n_; }
  int orientation_sign() const { return sign_; }
  std::span<const Point> corners() const { return {corners_.data(), static_cast<std::size_t>(1) << n_}; }

  FacePatch with_orientation(int sign) const;

  Point map(std::span<const double> s) const;
  /// Column k of the Jacobian of the parametrization at s.
  Point tangent(std::span<const double> s, int k) const;
  Point centroid() const;
  /// Largest corner-to-corner distance in chart coordinates, time excluded.
  double spatial_diameter() const;

 private:
  FaceKind kind_;
  int n_;
  int sign_;
  std::array<Point, 8> corners_{};
};

/// Nodes and per-frame weights of a face patch for a given rule. Evaluating a form
/// sum_alpha c^alpha (d^x)_alpha on the face reduces to sum_nodes sum_alpha w_alpha c^alpha(x).
class FaceQuadrature {
 public:
  struct Node {
    Point x{};
    std::array<double, kMaxChartDim> w{};  // orientation * weight * frame minor
    double area_w = 0.0;                    // weight * Euclidean area density
  };

  FaceQuadrature(const FacePatch& face, const QuadratureRule& rule);

  int chart_dim() const { return chart_dim_; }
  std::span<const Node> nodes() const { return nodes_; }
  bool frame_active(int alpha) const { return active_[alpha]; }

  /// sum_nodes sum_alpha w_alpha f(alpha, x); f returns the coefficient of (d^x)_alpha.
  template <class F>
  double integrate(F&& f) const {
    double total = 0.0;
    for (const Node& node : nodes_) {
      for (int a = 0; a < chart_dim_; ++a) {
        if (node.w[a] != 0.0) total += node.w[a] * f(a, node.x);
      }
    }
    return total;
  }

  /// Integral of g against the Euclidean area element of the face.
  template <class G>
  double integrate_area(G&& g) const {
    double total = 0.0;
    for (const Node& node : nodes_) total += node.area_w * g(node.x);
    return total;
  }

  double area() const;

  /// Integral of the pullback of omega(u).
  double flux(const FluxField& field, double u) const;
  /// Integral of the pullback of d_u omega(u).
  double flux_du(const FluxField& field, double u) const;

 private:
  int chart_dim_;
  std::array<bool, kMaxChartDim> active_{};
  std::array<double, kMaxChartDim> total_w_{};  // per-frame weight sums
  std::vector<Node> nodes_;
};

/// Multilinear image of [0,1]^{n+1}; reference axis 0 is time. Positively oriented.
class VolumePatch {
 public:
  VolumePatch(int space_dim, std::span<const Point> corners);
  int space_dim() const { return n_; }
  std::span<const Point> corners() const { return {corners_.data(), static_cast<std::size_t>(1) << (n_ + 1)}; }
  Point map(std::span<const double> s) const;
  Point tangent(std::span<const double> s, int k) const;

 private:
  int n_;
  std::array<Point, 16> corners_{};
};

class VolumeQuadrature {
 public:
  struct Node {
    Point x{};
    double w = 0.0;  // weight * Jacobian determinant
  };
  VolumeQuadrature(const VolumePatch& volume, const QuadratureRule& rule);
  std::span<const Node> nodes() const { return nodes_; }
  template <class G>
  double integrate(G&& g) const {
    double total = 0.0;
    for (const Node& node : nodes_) total += node.w * g(node.x);
    return total;
  }

 private:
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------------------------
// Operations on faces.

/// Integral over the face of the pullback of omega(u), including the face orientation.
double pullback_integral(const FluxField& flux, const FacePatch& face, double u,
                         const QuadratureRule& quad);

/// |e| = integral of the pullback of d_u omega(0). Throws DegenerateFaceError when not positive.
double face_measure(const FluxField& flux, const FacePatch& face, const QuadratureRule& quad);
double face_measure(const FluxField& flux, const FaceQuadrature& face);

/// phi_e(u) = (integral of i* omega(u)) / |e|.
double averaged_flux(const FluxField& flux, const FacePatch& face, double u,
                     const QuadratureRule& quad);

/// Solves phi_e(u) = target for u by bracketed Newton with bisection fallback.
double invert_averaged_flux(const FluxField& flux, const FacePatch& face, double target,
                            double tol, const QuadratureRule& quad);
double invert_averaged_flux(const FluxField& flux, const FaceQuadrature& face, double measure,
                            double target, double tol);

struct GeometryCheckSample {
  double u;
  Point x;
};

struct GeometryCompatibilityReport {
  double max_residual = 0.0;
  double max_derivative = 0.0;
  double threshold = 0.0;
  GeometryCheckSample worst{};
  bool pass = true;
};

/// Central-difference estimate of sum_alpha (-1)^alpha d_alpha omega^alpha at each sample.
GeometryCompatibilityReport check_geometry_compatible(const FluxField& flux,
                                                      std::span<const GeometryCheckSample> samples,
                                                      double h_fd);

struct DerivativeCheckReport {
  double max_error = 0.0;
  bool pass = true;
};

/// Compares component_du against central differences of component (step 1e-5 (1 + |u|)).
DerivativeCheckReport check_flux_derivatives(const FluxField& flux,
                                             std::span<const GeometryCheckSample> samples,
                                             double tol = 1e-6);

}  // namespace stfv
