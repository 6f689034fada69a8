#include "stfv/numflux.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "stfv/csv.hpp"
#include "stfv/errors.hpp"

namespace stfv {

namespace {

constexpr std::size_t kMaxWitnesses = 50;

// Interior minimum of g on [l, r], taking g unimodal there: it exists only when dg changes
// sign from - to +, and is then the root of dg (TOMS 748). Infinity otherwise; the minimum is
// then an endpoint, which the caller already holds.
template <class G, class DG>
double interior_min(G&& g, DG&& dg, double l, double r) {
  const double dl = dg(l);
  if (!(dl < 0.0)) return std::numeric_limits<double>::infinity();
  const double dr = dg(r);
  if (!(dr > 0.0)) return std::numeric_limits<double>::infinity();
  std::uintmax_t iters = 100;
  const auto [x0, x1] = boost::math::tools::toms748_solve(
      dg, l, r, dl, dr, boost::math::tools::eps_tolerance<double>(50), iters);
  return std::min(g(x0), g(x1));
}

// min over [a, b] of g = sigma * Phi: endpoints, grid scan (via argmin(jlo, jhi)), then
// refinement next to the best grid node. Shared by the direct and cached paths.
template <class G, class GridValue, class Argmin>
double godunov_min(const TotalFluxScheme& s, double sigma, const FaceFlux& face, double a, double b,
                   G&& g, GridValue&& grid_value, Argmin&& argmin) {
  const double ga = g(a);
  if (a == b) return ga;
  auto dg = [&](double w) { return sigma * face.dphi(w); };
  double best = std::min(ga, g(b));
  const int n = s.grid_size();
  const double lo = s.u_range().lo;
  const double step = s.u_range().width() / (n - 1);
  // First node strictly above a, last node strictly below b.
  int jlo = static_cast<int>(std::clamp(std::floor((a - lo) / step) - 1.0, 0.0, double(n)));
  while (jlo < n && s.grid_point(jlo) <= a) ++jlo;
  int jhi = static_cast<int>(std::clamp(std::ceil((b - lo) / step) + 1.0, -1.0, double(n - 1)));
  while (jhi >= 0 && s.grid_point(jhi) >= b) --jhi;
  if (jlo <= jhi) {
    const int j = argmin(jlo, jhi);
    best = std::min(best, grid_value(j));
    const double l = (j > jlo) ? s.grid_point(j - 1) : a;
    const double r = (j < jhi) ? s.grid_point(j + 1) : b;
    best = std::min(best, interior_min(g, dg, l, r));
  } else {
    best = std::min(best, interior_min(g, dg, a, b));
  }
  return best;
}

// Oriented integral from a to b: composite 20-point Gauss-Legendre, panels of width <= 0.25.
// Only applied to integrands that are smooth on [a, b].
template <class F>
double integrate(F&& f, double a, double b) {
  if (a == b) return 0.0;
  using boost::math::quadrature::gauss;
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.25)));
  const double h = (hi - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double l = lo + p * h;
    const double r = (p == panels - 1) ? hi : l + h;
    total += gauss<double, 20>::integrate(f, l, r);
  }
  return a < b ? total : -total;
}

// Root of f in [l, r] given f(l) and f(r) of opposite sign (or zero).
template <class F>
double bisect(F&& f, double l, double r) {
  double fl = f(l);
  for (int it = 0; it < 200 && r - l > 1e-15 * (1.0 + std::abs(l)); ++it) {
    const double m = 0.5 * (l + r);
    const double fm = f(m);
    if ((fm < 0.0) == (fl < 0.0)) {
      l = m;
      fl = fm;
    } else {
      r = m;
    }
  }
  return 0.5 * (l + r);
}

// int_a^b w(c) min_{[a,c]} g dc. The running minimum alternates between segments following g
// (ending at a local minimum of g) and flat segments (ending where g comes back down to the
// running level). Segment ends are bracketed by the scan points, sorted in (a, b], and
// refined by bisection; each segment is then smooth.
template <class G, class DG, class W>
double running_min_integral(G&& g, DG&& dg, W&& w, double a, double b,
                            const std::vector<double>& pts) {
  double total = 0.0;
  double c = a;
  double level = g(a);
  bool follow = dg(a) < 0.0;
  std::size_t p = 0;
  auto wg = [&](double x) { return w(x) * g(x); };
  const std::size_t cap = 4 * pts.size() + 16;
  for (std::size_t iter = 0; c < b; ++iter) {
    if (iter > cap) {
      total += level * integrate(w, c, b);
      break;
    }
    double e = b;
    double prev = c;
    if (follow) {
      for (; p < pts.size(); ++p) {
        if (dg(pts[p]) >= 0.0) {
          e = bisect(dg, prev, pts[p]);
          break;
        }
        prev = pts[p];
      }
      total += integrate(wg, c, e);
      level = std::min(level, g(e));
    } else {
      bool found = false;
      for (; p < pts.size(); ++p) {
        if (g(pts[p]) < level) {
          e = bisect([&](double x) { return g(x) - level; }, prev, pts[p]);
          found = true;
          break;
        }
        prev = pts[p];
      }
      total += level * integrate(w, c, e);
      if (!found) break;
    }
    follow = !follow;
    c = e;
    while (p < pts.size() && pts[p] <= c) ++p;
  }
  return total;
}

}  // namespace

std::string to_string(SchemeKind kind) {
  return kind == SchemeKind::godunov ? "godunov" : "lf";
}

SchemeKind parse_scheme_kind(const std::string& text) {
  if (text == "lf" || text == "lax_friedrichs" || text == "lax-friedrichs") {
    return SchemeKind::lax_friedrichs;
  }
  if (text == "godunov") return SchemeKind::godunov;
  throw ConfigError("unknown scheme '" + text + "' (expected lf or godunov)");
}

FaceFlux::FaceFlux(const FluxField& flux, std::shared_ptr<const FaceQuadrature> quad, int sign,
                   double sup_dphi, int face_id)
    : flux_(&flux), quad_(std::move(quad)), sign_(sign >= 0 ? 1 : -1), sup_dphi_(sup_dphi),
      face_id_(face_id) {}

FaceFlux mesh_face_flux(const FoliatedMesh& mesh, int slab, int k, int local) {
  const FaceRef& ref = mesh.cell(k).faces[local];
  auto quad = std::make_shared<const FaceQuadrature>(mesh.vertical_face(slab, ref.face),
                                                     mesh.quadrature());
  return FaceFlux(mesh.flux(), std::move(quad), ref.sign, mesh.sup_dphi(slab, ref.face), ref.face);
}

FaceFlux mesh_face_flux_raw(const FoliatedMesh& mesh, int slab, int f) {
  auto quad =
      std::make_shared<const FaceQuadrature>(mesh.vertical_face(slab, f), mesh.quadrature());
  return FaceFlux(mesh.flux(), std::move(quad), +1, mesh.sup_dphi(slab, f), f);
}

// ---------------------------------------------------------------------------------------------

TotalFluxScheme::TotalFluxScheme(SchemeKind kind, StateRange u_range, SchemeOptions options)
    : kind_(kind), range_(u_range), options_(options) {
  if (options_.godunov_grid < 2) throw ConfigError("godunov grid needs at least 2 points");
  if (!(options_.lf_lambda_scale > 0.0)) throw ConfigError("lf_lambda_scale must be positive");
}

double TotalFluxScheme::grid_point(int j) const {
  if (j == options_.godunov_grid - 1) return range_.hi;
  return range_.lo + range_.width() * static_cast<double>(j) / (options_.godunov_grid - 1);
}

double TotalFluxScheme::lambda(const FaceFlux& face) const {
  return options_.lf_lambda_scale * 1.1 * face.sup_dphi();
}

double TotalFluxScheme::evaluate(const FaceFlux& face, double u, double v) const {
  return kind_ == SchemeKind::godunov ? godunov_flux(*this, face, u, v)
                                      : lax_friedrichs_flux(face, lambda(face), u, v);
}

double lax_friedrichs_flux(const FaceFlux& face, double lambda, double u, double v) {
  return 0.5 * (face.phi(u) + face.phi(v)) + 0.5 * lambda * (u - v);
}

double godunov_flux(const TotalFluxScheme& scheme, const FaceFlux& face, double u, double v) {
  const double sigma = (u <= v) ? 1.0 : -1.0;
  const double a = std::min(u, v);
  const double b = std::max(u, v);
  auto g = [&](double w) { return sigma * face.phi(w); };
  auto grid_value = [&](int j) { return g(scheme.grid_point(j)); };
  auto argmin = [&](int jlo, int jhi) {
    int best = jlo;
    double best_value = grid_value(jlo);
    for (int j = jlo + 1; j <= jhi; ++j) {
      const double val = grid_value(j);
      if (val < best_value) {
        best_value = val;
        best = j;
      }
    }
    return best;
  };
  return sigma * godunov_min(scheme, sigma, face, a, b, g, grid_value, argmin);
}

// ---------------------------------------------------------------------------------------------

int GodunovFaceCache::Table::argmin(int lo, int hi, const std::vector<double>& value) const {
  const int len = hi - lo + 1;
  const int level = std::bit_width(static_cast<unsigned>(len)) - 1;
  const int i = levels[level][lo];
  const int j = levels[level][hi - (1 << level) + 1];
  // Ties resolve to the smaller index, like the linear scan.
  if (value[j] < value[i]) return j;
  if (value[i] < value[j]) return i;
  return std::min(i, j);
}

GodunovFaceCache::GodunovFaceCache(const TotalFluxScheme& scheme, const FaceFlux& face)
    : scheme_(&scheme), face_(&face) {
  const int n = scheme.grid_size();
  plus_.resize(n);
  minus_.resize(n);
  for (int j = 0; j < n; ++j) {
    plus_[j] = 1.0 * face.phi(scheme.grid_point(j));
    minus_[j] = -1.0 * face.phi(scheme.grid_point(j));
  }
  auto build = [n](Table& t, const std::vector<double>& value) {
    t.levels.clear();
    std::vector<int> base(n);
    for (int j = 0; j < n; ++j) base[j] = j;
    t.levels.push_back(std::move(base));
    for (int w = 1; 2 * w <= n; w *= 2) {
      const auto& prev = t.levels.back();
      std::vector<int> next(n - 2 * w + 1);
      for (int j = 0; j + 2 * w <= n; ++j) {
        const int a = prev[j];
        const int b = prev[j + w];
        next[j] = (value[b] < value[a]) ? b : a;
      }
      t.levels.push_back(std::move(next));
    }
  };
  build(plus_table_, plus_);
  build(minus_table_, minus_);
}

double GodunovFaceCache::evaluate(double u, double v) const {
  const double sigma = (u <= v) ? 1.0 : -1.0;
  const double a = std::min(u, v);
  const double b = std::max(u, v);
  const auto& values = (sigma > 0) ? plus_ : minus_;
  const auto& table = (sigma > 0) ? plus_table_ : minus_table_;
  auto g = [&](double w) { return sigma * face_->phi(w); };
  auto grid_value = [&](int j) { return values[j]; };
  auto argmin = [&](int jlo, int jhi) { return table.argmin(jlo, jhi, values); };
  return sigma * godunov_min(*scheme_, sigma, *face_, a, b, g, grid_value, argmin);
}

// ---------------------------------------------------------------------------------------------

double kruzkov_numerical_flux(const TotalFluxScheme& scheme, const FaceFlux& face, double u,
                              double v, double c) {
  return scheme.evaluate(face, std::max(u, c), std::max(v, c)) -
         scheme.evaluate(face, std::min(u, c), std::min(v, c));
}

namespace {

// int_m^M U''(c) Q_c(u, v) dc for the Godunov flux. With sigma = sgn(v - u) and g = sigma Phi,
// Q_c = sigma (min_{[c,M]} g - min_{[m,c]} g) on (m, M); the suffix minimum is a prefix
// minimum in the reflected variable s = -c.
double godunov_kruzkov_integral(const TotalFluxScheme& scheme, const FaceFlux& face,
                                const ConvexEntropy& e, double u, double v) {
  const double sigma = (u <= v) ? 1.0 : -1.0;
  const double m = std::min(u, v);
  const double M = std::max(u, v);
  std::vector<double> pts;
  for (int j = 0; j < scheme.grid_size(); ++j) {
    const double x = scheme.grid_point(j);
    if (x > m && x < M) pts.push_back(x);
  }
  pts.push_back(M);
  const double prefix = running_min_integral(
      [&](double c) { return sigma * face.phi(c); }, [&](double c) { return sigma * face.dphi(c); },
      e.d2U, m, M, pts);
  std::vector<double> rpts;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) rpts.push_back(-*it);
  rpts.push_back(-m);
  const double suffix = running_min_integral(
      [&](double s) { return sigma * face.phi(-s); }, [&](double s) { return -sigma * face.dphi(-s); },
      [&](double s) { return e.d2U(-s); }, -M, -m, rpts);
  return sigma * (suffix - prefix);
}

}  // namespace

double numerical_entropy_flux(const TotalFluxScheme& scheme, const FaceFlux& face,
                              const Entropy& entropy, double u, double v) {
  if (const auto* k = std::get_if<KruzkovEntropy>(&entropy)) {
    return kruzkov_numerical_flux(scheme, face, u, v, k->c);
  }
  const auto& e = std::get<ConvexEntropy>(entropy);
  const double m = std::min(u, v);
  const double M = std::max(u, v);
  const double q = scheme.evaluate(face, u, v);
  auto weighted_phi = [&](double c) { return e.d2U(c) * face.phi(c); };
  const double i_m = integrate(weighted_phi, 0.0, m);
  const double i_M = integrate(weighted_phi, 0.0, M);
  double i_mid = 0.0;
  if (m < M) {
    i_mid = scheme.kind() == SchemeKind::godunov
                ? godunov_kruzkov_integral(scheme, face, e, u, v)
                : integrate([&](double c) {
                    return e.d2U(c) * kruzkov_numerical_flux(scheme, face, u, v, c);
                  }, m, M);
  }
  return 0.5 * (e.dU(m) + e.dU(M)) * q - 0.5 * i_m - 0.5 * i_M + 0.5 * i_mid -
         e.dU(0.0) * face.phi(0.0);
}

// ---------------------------------------------------------------------------------------------

void FluxPropertyReport::merge(const FluxPropertyReport& o) {
  faces_checked += o.faces_checked;
  samples += o.samples;
  max_consistency = std::max(max_consistency, o.max_consistency);
  max_conservation = std::max(max_conservation, o.max_conservation);
  min_du = std::min(min_du, o.min_du);
  max_dv = std::max(max_dv, o.max_dv);
  failure_count += o.failure_count;
  for (const auto& f : o.failures) {
    if (failures.size() >= kMaxWitnesses) break;
    failures.push_back(f);
  }
}

FluxPropertyReport check_flux_properties(const TotalFluxScheme& scheme, const FaceFlux& face,
                                         int n_samples, std::uint64_t seed, int slab) {
  FluxPropertyReport rep;
  rep.faces_checked = 1;
  const FaceFlux other = face.opposite();
  std::optional<GodunovFaceCache> cache_k;
  std::optional<GodunovFaceCache> cache_o;
  if (scheme.kind() == SchemeKind::godunov) {
    cache_k.emplace(scheme, face);
    cache_o.emplace(scheme, other);
  }
  auto q = [&](double u, double v) {
    return cache_k ? cache_k->evaluate(u, v) : scheme.evaluate(face, u, v);
  };
  auto q_other = [&](double u, double v) {
    return cache_o ? cache_o->evaluate(u, v) : scheme.evaluate(other, u, v);
  };

  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(face.face_id() + 1)));
  std::uniform_real_distribution<double> dist(scheme.u_range().lo, scheme.u_range().hi);
  const double delta = 1e-6 * scheme.u_range().width();
  const double mono_scale = 1.0 + face.sup_dphi();
  auto fail = [&](const char* prop, double u, double v, double res, double thr) {
    ++rep.failure_count;
    if (rep.failures.size() < kMaxWitnesses) {
      rep.failures.push_back({prop, slab, face.face_id(), u, v, res, thr});
    }
  };
  for (int i = 0; i < n_samples; ++i) {
    const double u = dist(rng);
    const double v = dist(rng);
    ++rep.samples;

    const double phi_u = face.phi(u);
    const double cons_scale = 1.0 + std::abs(phi_u);
    const double r_cons = std::abs(q(u, u) - phi_u) / cons_scale;
    rep.max_consistency = std::max(rep.max_consistency, r_cons);
    if (r_cons > 1e-10) fail("consistency", u, v, r_cons, 1e-10);

    const double qvu = q(v, u);
    const double r_conv = std::abs(qvu + q_other(u, v)) / (1.0 + std::abs(qvu));
    rep.max_conservation = std::max(rep.max_conservation, r_conv);
    if (r_conv > 1e-10) fail("conservation", u, v, r_conv, 1e-10);

    const double du = (q(u + delta, v) - q(u - delta, v)) / (2.0 * delta) / mono_scale;
    const double dv = (q(u, v + delta) - q(u, v - delta)) / (2.0 * delta) / mono_scale;
    rep.min_du = std::min(rep.min_du, du);
    rep.max_dv = std::max(rep.max_dv, dv);
    if (du < -1e-8) fail("monotonicity_u", u, v, du, -1e-8);
    if (dv > 1e-8) fail("monotonicity_v", u, v, dv, 1e-8);
  }
  return rep;
}

std::vector<int> certification_slabs(const FoliatedMesh& mesh) {
  std::vector<int> slabs{0};
  const StateRange& r = mesh.flux().u_range();
  const double probes[] = {r.lo, 0.5 * (r.lo + r.hi) + 0.123 * r.width(), r.hi};
  auto signature = [&](int s) {
    std::vector<double> sig;
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const FaceFlux ff = mesh_face_flux_raw(mesh, s, f);
      for (double u : probes) sig.push_back(ff.phi(u));
      sig.push_back(ff.sup_dphi());
    }
    return sig;
  };
  // A slab is added whenever its face fluxes differ from the last certified slab's beyond
  // roundoff in the slice times.
  auto last = signature(0);
  for (int s = 1; s < mesh.num_slabs(); ++s) {
    auto sig = signature(s);
    bool same = true;
    for (std::size_t i = 0; i < sig.size() && same; ++i) {
      same = std::abs(sig[i] - last[i]) <= 1e-12 * (1.0 + std::abs(last[i]));
    }
    if (!same || s == mesh.num_slabs() - 1) {
      slabs.push_back(s);
      last = std::move(sig);
    }
  }
  return slabs;
}

FluxPropertyReport check_mesh_flux_properties(const TotalFluxScheme& scheme,
                                              const FoliatedMesh& mesh,
                                              const std::vector<int>& slabs, int n_samples,
                                              std::uint64_t seed) {
  FluxPropertyReport total;
  for (int s : slabs) {
    for (int f = 0; f < mesh.num_faces(); ++f) {
      const int k = mesh.face(f).cells[1];
      const auto& refs = mesh.cell(k).faces;
      const auto it = std::find_if(refs.begin(), refs.end(), [f](const FaceRef& r) { return r.face == f; });
      const int local = static_cast<int>(it - refs.begin());
      const FaceFlux face = mesh_face_flux(mesh, s, k, local);
      total.merge(check_flux_properties(scheme, face, n_samples,
                                        seed + 1000003ULL * static_cast<std::uint64_t>(s), s));
    }
  }
  return total;
}

void write_flux_properties_csv(const FluxPropertyReport& report, std::ostream& out) {
  out << "property,slab,face,u,v,residual,threshold\n";
  out << "max_consistency,-1,-1,nan,nan," << fmt17(report.max_consistency) << ",1e-10\n";
  out << "max_conservation,-1,-1,nan,nan," << fmt17(report.max_conservation) << ",1e-10\n";
  out << "min_du,-1,-1,nan,nan," << fmt17(report.min_du) << ",-1e-08\n";
  out << "max_dv,-1,-1,nan,nan," << fmt17(report.max_dv) << ",1e-08\n";
  for (const auto& f : report.failures) {
    out << f.property << ',' << f.slab << ',' << f.face << ',' << fmt17(f.u) << ',' << fmt17(f.v)
        << ',' << fmt17(f.residual) << ',' << fmt17(f.threshold) << '\n';
  }
}

}  // namespace stfv
