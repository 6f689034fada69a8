#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "stfv/forms.hpp"

namespace testing {

inline constexpr double kPi = std::numbers::pi;

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline stfv::Point pt(double t, double x, double y = 0.0) { return {t, x, y, 0.0}; }

// Spacelike interval [a, b] at time t.
inline stfv::FacePatch interval(double t, double a, double b) {
  const stfv::Point c[2] = {pt(t, a), pt(t, b)};
  return stfv::FacePatch(stfv::FaceKind::spacelike, 1, c);
}

// Vertical segment over x between times t0 and t1.
inline stfv::FacePatch vertical(double t0, double t1, double x, int sign = 1) {
  const stfv::Point c[2] = {pt(t0, x), pt(t1, x)};
  return stfv::FacePatch(stfv::FaceKind::vertical, 1, c, sign);
}

// omega given directly by frame coefficients (w0, w1) in 1D.
template <class F, class DF>
std::shared_ptr<const stfv::FluxField> field_1d(F f, DF df, stfv::StateRange range = {-1.0, 1.0},
                                                bool compatible = true) {
  return std::make_shared<const stfv::FluxField>(1, f, df, range, compatible, "test");
}

inline std::shared_ptr<const stfv::FluxField> flat_burgers() {
  return field_1d([](int a, double u, const stfv::Point&) { return a == 0 ? u : -0.5 * u * u; },
                  [](int a, double u, const stfv::Point&) { return a == 0 ? 1.0 : -u; });
}

}  // namespace testing
