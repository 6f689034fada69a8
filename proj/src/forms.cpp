#include "stfv/forms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

#include "stfv/errors.hpp"

namespace stfv {

namespace {

double det_small(std::array<std::array<double, kMaxSpaceDim>, kMaxSpaceDim> m, int n) {
  switch (n) {
    case 1:
      return m[0][0];
    case 2:
      return m[0][0] * m[1][1] - m[0][1] * m[1][0];
    case 3:
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
             m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    default:
      return 1.0;
  }
}

// Multilinear interpolation weight of corner c at reference point s.
double corner_weight(unsigned c, std::span<const double> s, int dims) {
  double w = 1.0;
  for (int k = 0; k < dims; ++k) w *= ((c >> k) & 1u) ? s[k] : 1.0 - s[k];
  return w;
}

double corner_weight_derivative(unsigned c, std::span<const double> s, int dims, int axis) {
  double w = 1.0;
  for (int k = 0; k < dims; ++k) {
    const bool high = (c >> k) & 1u;
    if (k == axis) {
      w *= high ? 1.0 : -1.0;
    } else {
      w *= high ? s[k] : 1.0 - s[k];
    }
  }
  return w;
}

template <class Corners>
Point multilinear_map(const Corners& corners, unsigned count, std::span<const double> s, int dims) {
  Point x{};
  for (unsigned c = 0; c < count; ++c) {
    const double w = corner_weight(c, s, dims);
    if (w == 0.0) continue;
    for (int a = 0; a < kMaxChartDim; ++a) x[a] += w * corners[c][a];
  }
  return x;
}

template <class Corners>
Point multilinear_tangent(const Corners& corners, unsigned count, std::span<const double> s,
                          int dims, int axis) {
  Point v{};
  for (unsigned c = 0; c < count; ++c) {
    const double w = corner_weight_derivative(c, s, dims, axis);
    if (w == 0.0) continue;
    for (int a = 0; a < kMaxChartDim; ++a) v[a] += w * corners[c][a];
  }
  return v;
}

// Loops over the tensor-product nodes of `rule` in `dims` reference dimensions.
template <class Visit>
void for_each_tensor_node(const QuadratureRule& rule, int dims, Visit&& visit) {
  const int q = rule.points_per_axis();
  std::array<int, kMaxChartDim> idx{};
  std::array<double, kMaxChartDim> s{};
  long total = 1;
  for (int k = 0; k < dims; ++k) total *= q;
  for (long flat = 0; flat < total; ++flat) {
    long rem = flat;
    double w = 1.0;
    for (int k = 0; k < dims; ++k) {
      idx[k] = static_cast<int>(rem % q);
      rem /= q;
      s[k] = rule.nodes()[idx[k]];
      w *= rule.weights()[idx[k]];
    }
    visit(std::span<const double>(s.data(), dims), w);
  }
}

void throw_non_finite(int alpha, double u, const Point& x, int chart_dim, const char* what) {
  std::ostringstream os;
  os << what << " component " << alpha << " is not finite at u=" << u << ", x="
     << to_string(x, chart_dim);
  throw EvaluationError(alpha, to_string(x, chart_dim), os.str());
}

}  // namespace

std::string to_string(const Point& x, int chart_dim) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (int a = 0; a < chart_dim; ++a) os << (a ? ", " : "") << x[a];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------------------------

QuadratureRule QuadratureRule::gauss_legendre(int q) {
  if (q < 1 || q > 64) throw ConfigError("quadrature: points per axis must be in [1, 64]");
  QuadratureRule rule;
  rule.nodes_.resize(q);
  rule.weights_.resize(q);
  for (int i = 0; i < q; ++i) {
    // Newton on P_q starting from the Chebyshev-like guess.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= q; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= q; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (z * p1 - p0) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // Map [-1,1] -> [0,1]; nodes ascending.
    rule.nodes_[i] = 0.5 * (1.0 - z);
    rule.weights_[i] = 0.5 * w;
  }
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < q; ++i) pairs.emplace_back(rule.nodes_[i], rule.weights_[i]);
  std::sort(pairs.begin(), pairs.end());
  for (int i = 0; i < q; ++i) {
    rule.nodes_[i] = pairs[i].first;
    rule.weights_[i] = pairs[i].second;
  }
  return rule;
}

// ---------------------------------------------------------------------------------------------

FluxField::FluxField(int dimension, ComponentFn component, ComponentFn component_du,
                     StateRange range, bool geometry_compatible, std::string name)
    : dimension_(dimension),
      component_(std::move(component)),
      component_du_(std::move(component_du)),
      range_(range),
      geometry_compatible_(geometry_compatible),
      name_(std::move(name)) {
  if (dimension_ < 1 || dimension_ > kMaxSpaceDim) {
    throw ConfigError("flux field: slice dimension must be in [1, " + std::to_string(kMaxSpaceDim) + "]");
  }
  if (!(range_.hi > range_.lo)) throw ConfigError("flux field: empty state range");
  if (!component_ || !component_du_) throw ConfigError("flux field: missing component function");
}

FluxField FluxField::from_classical(int dimension, ComponentFn f, ComponentFn f_du,
                                    StateRange range, bool geometry_compatible, std::string name) {
  auto signed_f = [f = std::move(f)](int alpha, double u, const Point& x) {
    const double v = f(alpha, u, x);
    return (alpha % 2 == 0) ? v : -v;
  };
  auto signed_f_du = [f_du = std::move(f_du)](int alpha, double u, const Point& x) {
    const double v = f_du(alpha, u, x);
    return (alpha % 2 == 0) ? v : -v;
  };
  return FluxField(dimension, std::move(signed_f), std::move(signed_f_du), range,
                   geometry_compatible, std::move(name));
}

// ---------------------------------------------------------------------------------------------

FacePatch::FacePatch(FaceKind kind, int space_dim, std::span<const Point> corners,
                     int orientation_sign)
    : kind_(kind), n_(space_dim), sign_(orientation_sign >= 0 ? 1 : -1) {
  if (n_ < 1 || n_ > kMaxSpaceDim) throw MeshError("face patch: unsupported dimension");
  const std::size_t count = std::size_t{1} << n_;
  if (corners.size() != count) throw MeshError("face patch: expected 2^n corners");
  std::copy(corners.begin(), corners.end(), corners_.begin());
}

FacePatch FacePatch::with_orientation(int sign) const {
  FacePatch copy = *this;
  copy.sign_ = sign >= 0 ? 1 : -1;
  return copy;
}

Point FacePatch::map(std::span<const double> s) const {
  return multilinear_map(corners_, 1u << n_, s, n_);
}

Point FacePatch::tangent(std::span<const double> s, int k) const {
  return multilinear_tangent(corners_, 1u << n_, s, n_, k);
}

Point FacePatch::centroid() const {
  Point c{};
  const unsigned count = 1u << n_;
  for (unsigned i = 0; i < count; ++i) {
    for (int a = 0; a < kMaxChartDim; ++a) c[a] += corners_[i][a] / count;
  }
  return c;
}

double FacePatch::spatial_diameter() const {
  double best = 0.0;
  const unsigned count = 1u << n_;
  for (unsigned i = 0; i < count; ++i) {
    for (unsigned j = i + 1; j < count; ++j) {
      double d2 = 0.0;
      for (int a = 1; a <= n_; ++a) {
        const double d = corners_[i][a] - corners_[j][a];
        d2 += d * d;
      }
      best = std::max(best, std::sqrt(d2));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------------------------

FaceQuadrature::FaceQuadrature(const FacePatch& face, const QuadratureRule& rule)
    : chart_dim_(face.space_dim() + 1) {
  const int n = face.space_dim();
  const double sign = face.orientation_sign();
  long total = 1;
  for (int k = 0; k < n; ++k) total *= rule.points_per_axis();
  nodes_.reserve(static_cast<std::size_t>(total));
  for_each_tensor_node(rule, n, [&](std::span<const double> s, double w) {
    Node node;
    node.x = face.map(s);
    std::array<Point, kMaxSpaceDim> cols{};
    for (int k = 0; k < n; ++k) cols[k] = face.tangent(s, k);
    for (int alpha = 0; alpha <= n; ++alpha) {
      std::array<std::array<double, kMaxSpaceDim>, kMaxSpaceDim> minor{};
      int r = 0;
      for (int beta = 0; beta <= n; ++beta) {
        if (beta == alpha) continue;
        for (int k = 0; k < n; ++k) minor[r][k] = cols[k][beta];
        ++r;
      }
      node.w[alpha] = sign * w * det_small(minor, n);
      if (node.w[alpha] != 0.0) active_[alpha] = true;
    }
    std::array<std::array<double, kMaxSpaceDim>, kMaxSpaceDim> gram{};
    for (int k = 0; k < n; ++k) {
      for (int l = 0; l < n; ++l) {
        double g = 0.0;
        for (int beta = 0; beta <= n; ++beta) g += cols[k][beta] * cols[l][beta];
        gram[k][l] = g;
      }
    }
    node.area_w = w * std::sqrt(std::max(0.0, det_small(gram, n)));
    nodes_.push_back(node);
  });
  for (const Node& node : nodes_) {
    for (int a = 0; a < chart_dim_; ++a) total_w_[a] += node.w[a];
  }
}

double FaceQuadrature::area() const {
  double total = 0.0;
  for (const Node& node : nodes_) total += node.area_w;
  return total;
}

double FaceQuadrature::flux(const FluxField& field, double u) const {
  double total = 0.0;
  if (field.position_independent() && !nodes_.empty()) {
    const Point& x = nodes_.front().x;
    for (int a = 0; a < chart_dim_; ++a) {
      if (!active_[a]) continue;
      const double c = field.component(a, u, x);
      if (!std::isfinite(c)) throw_non_finite(a, u, x, chart_dim_, "flux");
      total += total_w_[a] * c;
    }
    return total;
  }
  for (const Node& node : nodes_) {
    for (int a = 0; a < chart_dim_; ++a) {
      if (node.w[a] == 0.0) continue;
      const double c = field.component(a, u, node.x);
      if (!std::isfinite(c)) throw_non_finite(a, u, node.x, chart_dim_, "flux");
      total += node.w[a] * c;
    }
  }
  return total;
}

double FaceQuadrature::flux_du(const FluxField& field, double u) const {
  double total = 0.0;
  if (field.position_independent() && !nodes_.empty()) {
    const Point& x = nodes_.front().x;
    for (int a = 0; a < chart_dim_; ++a) {
      if (!active_[a]) continue;
      const double c = field.component_du(a, u, x);
      if (!std::isfinite(c)) throw_non_finite(a, u, x, chart_dim_, "flux derivative");
      total += total_w_[a] * c;
    }
    return total;
  }
  for (const Node& node : nodes_) {
    for (int a = 0; a < chart_dim_; ++a) {
      if (node.w[a] == 0.0) continue;
      const double c = field.component_du(a, u, node.x);
      if (!std::isfinite(c)) throw_non_finite(a, u, node.x, chart_dim_, "flux derivative");
      total += node.w[a] * c;
    }
  }
  return total;
}

// ---------------------------------------------------------------------------------------------

VolumePatch::VolumePatch(int space_dim, std::span<const Point> corners) : n_(space_dim) {
  if (n_ < 1 || n_ > kMaxSpaceDim) throw MeshError("volume patch: unsupported dimension");
  const std::size_t count = std::size_t{1} << (n_ + 1);
  if (corners.size() != count) throw MeshError("volume patch: expected 2^(n+1) corners");
  std::copy(corners.begin(), corners.end(), corners_.begin());
}

Point VolumePatch::map(std::span<const double> s) const {
  return multilinear_map(corners_, 1u << (n_ + 1), s, n_ + 1);
}

Point VolumePatch::tangent(std::span<const double> s, int k) const {
  return multilinear_tangent(corners_, 1u << (n_ + 1), s, n_ + 1, k);
}

VolumeQuadrature::VolumeQuadrature(const VolumePatch& volume, const QuadratureRule& rule) {
  const int dims = volume.space_dim() + 1;
  for_each_tensor_node(rule, dims, [&](std::span<const double> s, double w) {
    Node node;
    node.x = volume.map(s);
    // Full (n+1)x(n+1) Jacobian determinant by Gaussian elimination.
    std::array<std::array<double, kMaxChartDim>, kMaxChartDim> m{};
    for (int k = 0; k < dims; ++k) {
      const Point col = volume.tangent(s, k);
      for (int beta = 0; beta < dims; ++beta) m[beta][k] = col[beta];
    }
    double det = 1.0;
    for (int c = 0; c < dims; ++c) {
      int pivot = c;
      for (int r = c + 1; r < dims; ++r) {
        if (std::abs(m[r][c]) > std::abs(m[pivot][c])) pivot = r;
      }
      if (m[pivot][c] == 0.0) {
        det = 0.0;
        break;
      }
      if (pivot != c) {
        std::swap(m[pivot], m[c]);
        det = -det;
      }
      det *= m[c][c];
      for (int r = c + 1; r < dims; ++r) {
        const double f = m[r][c] / m[c][c];
        for (int k = c; k < dims; ++k) m[r][k] -= f * m[c][k];
      }
    }
    node.w = w * det;
    nodes_.push_back(node);
  });
}

// ---------------------------------------------------------------------------------------------

double pullback_integral(const FluxField& flux, const FacePatch& face, double u,
                         const QuadratureRule& quad) {
  return FaceQuadrature(face, quad).flux(flux, u);
}

double face_measure(const FluxField& flux, const FaceQuadrature& face) {
  const double m = face.flux_du(flux, 0.0);
  if (!(m > 0.0)) {
    std::ostringstream os;
    os << "degenerate face: |e| = " << m << " is not positive";
    throw DegenerateFaceError(os.str());
  }
  return m;
}

double face_measure(const FluxField& flux, const FacePatch& face, const QuadratureRule& quad) {
  return face_measure(flux, FaceQuadrature(face, quad));
}

double averaged_flux(const FluxField& flux, const FacePatch& face, double u,
                     const QuadratureRule& quad) {
  const FaceQuadrature fq(face, quad);
  return fq.flux(flux, u) / face_measure(flux, fq);
}

double invert_averaged_flux(const FluxField& flux, const FacePatch& face, double target,
                            double tol, const QuadratureRule& quad) {
  const FaceQuadrature fq(face, quad);
  return invert_averaged_flux(flux, fq, face_measure(flux, fq), target, tol);
}

double invert_averaged_flux(const FluxField& flux, const FaceQuadrature& face, double measure,
                            double target, double tol) {
  const StateRange bracket = flux.u_range().widened(0.1);
  double lo = bracket.lo;
  double hi = bracket.hi;
  auto phi = [&](double u) { return face.flux(flux, u) / measure; };
  const double f_lo = phi(lo) - target;
  const double f_hi = phi(hi) - target;
  if (!std::isfinite(target) || f_lo > tol || f_hi < -tol) {
    std::ostringstream os;
    os.precision(17);
    os << "averaged flux inversion: target " << target << " outside [" << f_lo + target << ", "
       << f_hi + target << "] over states [" << lo << ", " << hi << "]";
    throw InversionRangeError(os.str());
  }
  if (std::abs(f_lo) <= tol) return lo;
  if (std::abs(f_hi) <= tol) return hi;

  double u = lo + (hi - lo) * (-f_lo) / (f_hi - f_lo);
  for (int it = 0; it < 100; ++it) {
    const double f = phi(u) - target;
    if (std::abs(f) <= tol) return u;
    if (f < 0.0) {
      lo = u;
    } else {
      hi = u;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(u))) {
      break;
    }
    const double d = face.flux_du(flux, u) / measure;
    double next = (d > 0.0) ? u - f / d : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    u = next;
  }
  std::ostringstream os;
  os.precision(17);
  os << "averaged flux inversion did not converge to tol " << tol << " (target " << target
     << ", last u " << u << ")";
  throw ConvergenceError(os.str());
}

// ---------------------------------------------------------------------------------------------

GeometryCompatibilityReport check_geometry_compatible(const FluxField& flux,
                                                      std::span<const GeometryCheckSample> samples,
                                                      double h_fd) {
  GeometryCompatibilityReport report;
  const int dims = flux.chart_dim();
  for (const GeometryCheckSample& sample : samples) {
    double residual = 0.0;
    for (int alpha = 0; alpha < dims; ++alpha) {
      Point xp = sample.x;
      Point xm = sample.x;
      xp[alpha] += h_fd;
      xm[alpha] -= h_fd;
      const double d =
          (flux.component(alpha, sample.u, xp) - flux.component(alpha, sample.u, xm)) / (2.0 * h_fd);
      report.max_derivative = std::max(report.max_derivative, std::abs(d));
      residual += (alpha % 2 == 0) ? d : -d;
    }
    if (&sample == samples.data() || std::abs(residual) > report.max_residual) {
      report.max_residual = std::abs(residual);
      report.worst = sample;
    }
  }
  report.threshold = 1e-6 * (1.0 + report.max_derivative);
  report.pass = report.max_residual <= report.threshold;
  return report;
}

DerivativeCheckReport check_flux_derivatives(const FluxField& flux,
                                             std::span<const GeometryCheckSample> samples,
                                             double tol) {
  DerivativeCheckReport report;
  for (const GeometryCheckSample& sample : samples) {
    const double h = 1e-5 * (1.0 + std::abs(sample.u));
    for (int alpha = 0; alpha < flux.chart_dim(); ++alpha) {
      const double fd = (flux.component(alpha, sample.u + h, sample.x) -
                         flux.component(alpha, sample.u - h, sample.x)) /
                        (2.0 * h);
      const double exact = flux.component_du(alpha, sample.u, sample.x);
      const double err = std::abs(fd - exact) / (1.0 + std::abs(exact));
      report.max_error = std::max(report.max_error, err);
    }
  }
  report.pass = report.max_error <= tol;
  return report;
}

}  // namespace stfv
