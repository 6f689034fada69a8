#include "stfv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stfv/csv.hpp"
#include "stfv/errors.hpp"

namespace stfv {

namespace {

constexpr double kFaceTol = 1e-9;
constexpr double kElementTol = 1e-9;
constexpr double kBalanceTol = 1e-9;
constexpr double kGlobalTol = 1e-8;
constexpr int kConvexityGrid = 128;
constexpr std::size_t kMaxWitnessRows = 50;

void require_intermediates(const Trajectory& traj) {
  if (!traj.has_intermediates()) {
    throw ConfigError("entropy diagnostics need a trajectory run with record_intermediates");
  }
}

// Per-element quantities shared by the face and element residuals.
struct ElementView {
  const Trajectory& traj;
  const EntropyFluxField& entropy;
  int slab;
  int k;
  FaceQuadrature upper;
  double ep;
  double uk;

  ElementView(const Trajectory& t, const EntropyFluxField& e, int s, int kk)
      : traj(t), entropy(e), slab(s), k(kk),
        upper(t.mesh().upper_face(s, kk), t.mesh().quadrature()), ep(t.mesh().e_plus(s, kk)),
        uk(t.u_minus(s, kk)) {}

  double phi_omega(double u) const { return upper.flux(entropy.form(), u) / ep; }
  int num_faces() const { return static_cast<int>(traj.mesh().cell(k).faces.size()); }

  // Q(u_K^-, u_nb^-) - Q(u_K^-, u_K^-) on local face j.
  double entropy_flux_jump(int j) const {
    const FoliatedMesh& mesh = traj.mesh();
    const FaceFlux face = mesh_face_flux(mesh, slab, k, j);
    const double unb = traj.u_minus(slab, mesh.cell(k).faces[j].neighbor);
    const Entropy& e = entropy.entropy();
    return numerical_entropy_flux(traj.scheme(), face, e, uk, unb) -
           numerical_entropy_flux(traj.scheme(), face, e, uk, uk);
  }
};

Residual face_residual(const ElementView& el, int j, double phi_minus, double jump) {
  const double ut = el.traj.intermediate(el.slab, el.k, j);
  Residual r;
  r.value = el.phi_omega(ut) - phi_minus + el.num_faces() / el.ep * jump;
  r.threshold = kFaceTol * (1.0 + std::abs(phi_minus));
  return r;
}

Residual element_residual(const ElementView& el, double phi_minus, double jump_sum) {
  const double up = el.traj.u_plus(el.slab, el.k);
  Residual r;
  r.value = el.ep * (el.phi_omega(up) - phi_minus) + jump_sum;
  r.threshold = kElementTol * el.ep * (1.0 + std::abs(phi_minus));
  return r;
}

class SweepBuilder {
 public:
  explicit SweepBuilder(std::string kind) { sweep_.kind = std::move(kind); }

  void begin_slab() {
    slab_best_ = DiagnosticRow{};
    slab_best_.kind = sweep_.kind;
    slab_has_ = false;
  }
  void add(int slab, int element, const Residual& r) {
    ++sweep_.checked;
    const double excess = r.value - r.threshold;
    if (sweep_.checked == 1 || r.value > sweep_.max_value) sweep_.max_value = r.value;
    if (sweep_.checked == 1 || excess > sweep_.max_excess) sweep_.max_excess = excess;
    DiagnosticRow row{sweep_.kind, slab, element, r.value, r.threshold, r.pass()};
    if (!slab_has_ || r.value > slab_best_.value) {
      slab_best_ = row;
      slab_has_ = true;
    }
    if (!r.pass()) {
      ++sweep_.failures;
      if (witnesses_.size() < kMaxWitnessRows) witnesses_.push_back(row);
    }
  }
  void end_slab() {
    if (slab_has_) slab_rows_.push_back(slab_best_);
  }
  ResidualSweep finish() {
    sweep_.rows = std::move(slab_rows_);
    for (auto& w : witnesses_) {
      w.kind += "_witness";
      sweep_.rows.push_back(std::move(w));
    }
    return std::move(sweep_);
  }

 private:
  ResidualSweep sweep_;
  DiagnosticRow slab_best_;
  bool slab_has_ = false;
  std::vector<DiagnosticRow> slab_rows_;
  std::vector<DiagnosticRow> witnesses_;
};

StateRange trajectory_range(const Trajectory& traj) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const SliceState& s : traj.states()) {
    for (double u : s.u) {
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
  }
  if (traj.has_intermediates()) {
    const FoliatedMesh& mesh = traj.mesh();
    for (int s = 0; s < mesh.num_slabs(); ++s) {
      for (int k = 0; k < mesh.num_cells(); ++k) {
        for (std::size_t j = 0; j < mesh.cell(k).faces.size(); ++j) {
          const double u = traj.intermediate(s, k, static_cast<int>(j));
          lo = std::min(lo, u);
          hi = std::max(hi, u);
        }
      }
    }
  }
  const StateRange& full = traj.flux().u_range();
  if (!(hi - lo > 1e-9 * full.width())) {
    // A (nearly) constant trajectory: sample a small neighborhood instead.
    const double mid = 0.5 * (lo + hi);
    const double half = 0.05 * full.width();
    return {std::max(full.lo, mid - half), std::min(full.hi, mid + half)};
  }
  return {lo, hi};
}

}  // namespace

Residual face_entropy_residual(const Trajectory& traj, int slab, int k, int j,
                               const EntropyFluxField& entropy) {
  require_intermediates(traj);
  const ElementView el(traj, entropy, slab, k);
  return face_residual(el, j, el.phi_omega(el.uk), el.entropy_flux_jump(j));
}

Residual element_entropy_residual(const Trajectory& traj, int slab, int k,
                                  const EntropyFluxField& entropy) {
  const ElementView el(traj, entropy, slab, k);
  double jumps = 0.0;
  for (int j = 0; j < el.num_faces(); ++j) jumps += el.entropy_flux_jump(j);
  return element_residual(el, el.phi_omega(el.uk), jumps);
}

ResidualSweep sweep_face_residuals(const Trajectory& traj, const EntropyFluxField& entropy,
                                   const std::string& kind) {
  require_intermediates(traj);
  const FoliatedMesh& mesh = traj.mesh();
  SweepBuilder b(kind);
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    b.begin_slab();
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const ElementView el(traj, entropy, s, k);
      const double phi_minus = el.phi_omega(el.uk);
      for (int j = 0; j < el.num_faces(); ++j) {
        b.add(s, k, face_residual(el, j, phi_minus, el.entropy_flux_jump(j)));
      }
    }
    b.end_slab();
  }
  return b.finish();
}

ResidualSweep sweep_element_residuals(const Trajectory& traj, const EntropyFluxField& entropy,
                                      const std::string& kind) {
  const FoliatedMesh& mesh = traj.mesh();
  SweepBuilder b(kind);
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    b.begin_slab();
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const ElementView el(traj, entropy, s, k);
      double jumps = 0.0;
      for (int j = 0; j < el.num_faces(); ++j) jumps += el.entropy_flux_jump(j);
      b.add(s, k, element_residual(el, el.phi_omega(el.uk), jumps));
    }
    b.end_slab();
  }
  return b.finish();
}

EntropyResidualSweeps sweep_entropy_residuals(const Trajectory& traj,
                                              const EntropyFluxField& entropy,
                                              const std::string& label) {
  require_intermediates(traj);
  const FoliatedMesh& mesh = traj.mesh();
  SweepBuilder fb("face_" + label);
  SweepBuilder eb("element_" + label);
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    fb.begin_slab();
    eb.begin_slab();
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const ElementView el(traj, entropy, s, k);
      const double phi_minus = el.phi_omega(el.uk);
      double sum = 0.0;
      for (int j = 0; j < el.num_faces(); ++j) {
        const double jump = el.entropy_flux_jump(j);
        sum += jump;
        fb.add(s, k, face_residual(el, j, phi_minus, jump));
      }
      eb.add(s, k, element_residual(el, phi_minus, sum));
    }
    fb.end_slab();
    eb.end_slab();
  }
  return {fb.finish(), eb.finish()};
}

// ---------------------------------------------------------------------------------------------

ConvexityEstimate estimate_convexity(const Trajectory& traj, const EntropyFluxField& entropy) {
  const FoliatedMesh& mesh = traj.mesh();
  ConvexityEstimate est;
  est.range = trajectory_range(traj);
  est.beta = std::numeric_limits<double>::infinity();
  est.c_lower = std::numeric_limits<double>::infinity();
  est.beta_element.assign(mesh.num_slabs(), std::vector<double>(mesh.num_cells()));
  est.c_element.assign(mesh.num_slabs(), std::vector<double>(mesh.num_cells()));

  std::vector<double> grid(kConvexityGrid);
  for (int g = 0; g < kConvexityGrid; ++g) {
    grid[g] = est.range.lo + est.range.width() * g / (kConvexityGrid - 1.0);
  }
  std::vector<double> v(kConvexityGrid);
  std::vector<double> V(kConvexityGrid);
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const FaceQuadrature upper(mesh.upper_face(s, k), mesh.quadrature());
      const double ep = mesh.e_plus(s, k);
      for (int g = 0; g < kConvexityGrid; ++g) {
        v[g] = upper.flux(mesh.flux(), grid[g]) / ep;
        V[g] = upper.flux(entropy.form(), grid[g]) / ep;
      }
      double beta = std::numeric_limits<double>::infinity();
      double c = std::numeric_limits<double>::infinity();
      for (int g = 0; g + 1 < kConvexityGrid; ++g) {
        c = std::min(c, (v[g + 1] - v[g]) / (grid[g + 1] - grid[g]));
        if (g == 0) continue;
        const double left = (V[g] - V[g - 1]) / (v[g] - v[g - 1]);
        const double right = (V[g + 1] - V[g]) / (v[g + 1] - v[g]);
        beta = std::min(beta, 2.0 * (right - left) / (v[g + 1] - v[g - 1]));
      }
      est.beta_element[s][k] = beta;
      est.c_element[s][k] = c;
      est.beta = std::min(est.beta, beta);
      est.c_lower = std::min(est.c_lower, c);
    }
  }
  return est;
}

BalanceTable make_balance_table(const Trajectory& traj, const EntropyFluxField& entropy,
                                const ConvexityEstimate& convexity) {
  require_intermediates(traj);
  const FoliatedMesh& mesh = traj.mesh();
  BalanceTable t;
  for (int i = 0; i <= mesh.num_slabs(); ++i) {
    const auto& u = traj.state(i).u;
    double total = 0.0;
    for (int k = 0; k < mesh.num_cells(); ++k) {
      total += FaceQuadrature(mesh.slice_face(i, k), mesh.quadrature()).flux(entropy.form(), u[k]);
    }
    t.slice_entropy.push_back(total);
  }
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    double global = 0.0;
    double local = 0.0;
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const int nk = static_cast<int>(mesh.cell(k).faces.size());
      const double up = traj.u_plus(s, k);
      double sq = 0.0;
      for (int j = 0; j < nk; ++j) {
        const double d = traj.intermediate(s, k, j) - up;
        sq += d * d;
      }
      const double c = convexity.c_element[s][k];
      const double base = c * c * mesh.e_plus(s, k) / (2.0 * nk) * sq;
      global += base;
      local += std::max(convexity.beta_element[s][k], 0.0) * base;
    }
    t.slab_dissipation.push_back(global);
    t.slab_dissipation_local.push_back(local);
  }
  return t;
}

namespace {

BalanceResult balance(const BalanceTable& table, int i, int j, double weight,
                      const std::vector<double>& dissipation) {
  const int slices = static_cast<int>(table.slice_entropy.size());
  if (i < 0 || j < i || j >= slices) {
    throw DomainError("entropy_balance: need 0 <= i <= j <= N, got i = " + std::to_string(i) +
                      ", j = " + std::to_string(j));
  }
  BalanceResult r;
  r.i = i;
  r.j = j;
  r.lhs = table.slice_entropy[j];
  r.rhs = table.slice_entropy[i];
  for (int s = i; s < j; ++s) r.dissipation += weight * dissipation[s];
  r.threshold = kBalanceTol * (1.0 + std::abs(r.lhs) + std::abs(r.rhs));
  r.pass = r.lhs + r.dissipation <= r.rhs + r.threshold;
  return r;
}

}  // namespace

BalanceResult entropy_balance(const BalanceTable& table, int i, int j, double beta) {
  const bool degenerate = !(beta > 0.0);
  BalanceResult r = balance(table, i, j, degenerate ? 0.0 : beta, table.slab_dissipation);
  r.degenerate_beta = degenerate;
  return r;
}

BalanceResult entropy_balance_local(const BalanceTable& table, int i, int j) {
  return balance(table, i, j, 1.0, table.slab_dissipation_local);
}

BalanceResult entropy_balance(const Trajectory& traj, int i, int j, const EntropyFluxField& entropy,
                              double beta) {
  const ConvexityEstimate est = estimate_convexity(traj, entropy);
  return entropy_balance(make_balance_table(traj, entropy, est), i, j, beta);
}

DissipationEstimate dissipation_estimate(const Trajectory& traj, const InitialData& u0) {
  require_intermediates(traj);
  const FoliatedMesh& mesh = traj.mesh();
  const EntropyFluxField quad(traj.mesh().flux_ptr(), ConvexEntropy::quadratic());
  DissipationEstimate d;
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const int nk = static_cast<int>(mesh.cell(k).faces.size());
      const double up = traj.u_plus(s, k);
      double sq = 0.0;
      for (int j = 0; j < nk; ++j) {
        const double diff = traj.intermediate(s, k, j) - up;
        sq += diff * diff;
      }
      d.lhs_sum += mesh.e_plus(s, k) / nk * sq;
    }
  }
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const FaceQuadrature fq(mesh.slice_face(0, k), mesh.quadrature());
    d.initial_entropy +=
        fq.integrate([&](int a, const Point& x) { return quad.component(a, u0(x), x); });
  }
  d.ratio = (d.lhs_sum == 0.0 && d.initial_entropy == 0.0) ? 0.0 : d.lhs_sum / d.initial_entropy;
  return d;
}

// ---------------------------------------------------------------------------------------------

double contraction_distance(const FoliatedMesh& mesh, const SliceState& u, const SliceState& v) {
  if (u.slab != v.slab) {
    throw DomainError("contraction_distance: states on slices " + std::to_string(u.slab) +
                      " and " + std::to_string(v.slab));
  }
  if (u.slab < 0 || u.slab > mesh.num_slabs() ||
      static_cast<int>(u.u.size()) != mesh.num_cells() ||
      static_cast<int>(v.u.size()) != mesh.num_cells()) {
    throw DomainError("contraction_distance: states do not match the mesh");
  }
  double total = 0.0;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const FaceQuadrature fq(mesh.slice_face(u.slab, k), mesh.quadrature());
    total += kruzkov_face_integral(mesh.flux(), fq, u.u[k], v.u[k]);
  }
  return total;
}

std::vector<double> contraction_series(const Trajectory& u, const Trajectory& v) {
  if (u.mesh_ptr() != v.mesh_ptr() || u.states().size() != v.states().size()) {
    throw DomainError("contraction_series: trajectories live on different meshes");
  }
  std::vector<double> out;
  out.reserve(u.states().size());
  for (std::size_t i = 0; i < u.states().size(); ++i) {
    out.push_back(contraction_distance(u.mesh(), u.states()[i], v.states()[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

double wrap(double d) { return d - std::round(d); }

// (1 - s^2)^3 and its derivative in s, zero for |s| >= 1.
double bump(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double w = 1.0 - s * s;
  return w * w * w;
}
double bump_ds(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double w = 1.0 - s * s;
  return -6.0 * s * w * w;
}

}  // namespace

TestFunction::TestFunction(int space_dim, double t_cut, SpacePoint center, double radius)
    : n_(space_dim), t_cut_(t_cut), center_(center), r_(radius) {
  if (space_dim < 1 || space_dim > kMaxSpaceDim) throw ConfigError("test function: bad dimension");
  if (!(t_cut > 0.0)) throw ConfigError("test function: t_cut must be positive");
  if (!(radius > 0.0 && radius < 0.5)) throw ConfigError("test function: radius must be in (0, 0.5)");
}

double TestFunction::operator()(const Point& x) const {
  if (x[0] < 0.0) return 0.0;
  double v = bump(x[0] / t_cut_);
  for (int k = 0; k < n_ && v != 0.0; ++k) v *= bump(wrap(x[k + 1] - center_[k]) / r_);
  return v;
}

Point TestFunction::gradient(const Point& x) const {
  Point g{};
  if (x[0] < 0.0) return g;
  const double tt = x[0] / t_cut_;
  std::array<double, kMaxSpaceDim> s{};
  for (int k = 0; k < n_; ++k) s[k] = wrap(x[k + 1] - center_[k]) / r_;
  for (int a = 0; a <= n_; ++a) {
    double v = (a == 0) ? bump_ds(tt) / t_cut_ : bump(tt);
    for (int k = 0; k < n_ && v != 0.0; ++k) {
      v *= (a == k + 1) ? bump_ds(s[k]) / r_ : bump(s[k]);
    }
    g[a] = v;
  }
  return g;
}

bool TestFunction::vanishes_on_box(const SpacePoint& lo, const SpacePoint& hi) const {
  for (int k = 0; k < n_; ++k) {
    if (hi[k] - lo[k] >= 1.0) continue;
    // Nearest periodic image of the center relative to the interval.
    const double mid = 0.5 * (lo[k] + hi[k]);
    const double c = mid + wrap(center_[k] - mid);
    const double d = c < lo[k] ? lo[k] - c : (c > hi[k] ? c - hi[k] : 0.0);
    if (d >= r_) return true;
  }
  return false;
}

std::string TestFunction::describe() const {
  std::ostringstream os;
  os.precision(6);
  os << "bump(t_cut=" << t_cut_ << ",r=" << r_ << ",center=";
  for (int k = 0; k < n_; ++k) os << (k ? ";" : "") << center_[k];
  os << ")";
  return os.str();
}

void TestFunction::check_support(const FoliatedMesh& mesh) const {
  const auto& t = mesh.slice_times();
  const int n = mesh.num_slabs();
  if (n < 3 || t_cut_ > t[n - 2]) {
    throw DomainError("test function " + describe() +
                      " does not vanish on the last two slabs (t_cut > " +
                      fmt17(n >= 2 ? t[n - 2] : 0.0) + ")");
  }
}

GlobalInequalityTerms global_inequality_terms(const Trajectory& traj, const TestFunction& psi,
                                              const EntropyFluxField& entropy) {
  require_intermediates(traj);
  const FoliatedMesh& mesh = traj.mesh();
  if (!mesh.flux().geometry_compatible()) {
    throw ConfigError("global entropy inequality needs a geometry-compatible flux");
  }
  psi.check_support(mesh);
  const FluxField& omega = entropy.form();
  const int n = mesh.space_dim();
  auto psi_fn = [&](const Point& x) { return psi(x); };
  auto average = [&](const FaceQuadrature& q) { return q.integrate_area(psi_fn) / q.area(); };

  GlobalInequalityTerms r;
  double volume_sum = 0.0;
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    if (mesh.slice_times()[s] >= psi.t_cut()) break;
    for (int k = 0; k < mesh.num_cells(); ++k) {
      SpacePoint lo;
      SpacePoint hi;
      lo.fill(std::numeric_limits<double>::infinity());
      hi.fill(-std::numeric_limits<double>::infinity());
      for (int slice : {s, s + 1}) {
        for (int v : mesh.cell(k).vertices) {
          const SpacePoint& p = mesh.vertex(slice, v);
          for (int d = 0; d < n; ++d) {
            lo[d] = std::min(lo[d], p[d]);
            hi[d] = std::max(hi[d], p[d]);
          }
        }
      }
      // Multilinear prisms stay inside their vertex box.
      if (psi.vanishes_on_box(lo, hi)) continue;

      const double um = traj.u_minus(s, k);
      const double up = traj.u_plus(s, k);
      const int nk = static_cast<int>(mesh.cell(k).faces.size());

      const VolumeQuadrature vq(mesh.volume(s, k), mesh.quadrature());
      volume_sum += vq.integrate([&](const Point& x) {
        const Point g = psi.gradient(x);
        double acc = 0.0;
        for (int a = 0; a <= n; ++a) {
          if (g[a] == 0.0) continue;
          const double term = g[a] * omega.component(a, um, x);
          acc += (a % 2 == 0) ? term : -term;
        }
        return acc;
      });

      std::vector<double> psi_face(nk);
      double psi_boundary = 0.0;
      for (int j = 0; j < nk; ++j) {
        const FaceFlux face = mesh_face_flux(mesh, s, k, j);
        const FaceQuadrature& fq = face.quadrature();
        psi_face[j] = average(fq);
        psi_boundary += psi_face[j] / nk;
        // K-outward integral of (psi_e0 - psi) Omega(u_K^-).
        r.B += face.sign() * fq.integrate([&](int a, const Point& x) {
          const double w = psi_face[j] - psi(x);
          return w == 0.0 ? 0.0 : w * omega.component(a, um, x);
        });
      }

      const FaceQuadrature upper(mesh.upper_face(s, k), mesh.quadrature());
      const double ep = mesh.e_plus(s, k);
      const double phi_up = upper.flux(omega, up) / ep;
      for (int j = 0; j < nk; ++j) {
        if (psi_boundary == psi_face[j]) continue;
        const double phi_t = upper.flux(omega, traj.intermediate(s, k, j)) / ep;
        r.A += ep / nk * (psi_boundary - psi_face[j]) * (phi_t - phi_up);
      }
      r.C -= upper.integrate([&](int a, const Point& x) {
        const double w = psi_boundary - psi(x);
        return w == 0.0 ? 0.0 : w * (omega.component(a, up, x) - omega.component(a, um, x));
      });

      if (s == 0) {
        const FaceQuadrature lower(mesh.lower_face(0, k), mesh.quadrature());
        r.lhs -= lower.integrate(
            [&](int a, const Point& x) {
              const double w = psi(x);
              return w == 0.0 ? 0.0 : w * omega.component(a, um, x);
            });
      }
    }
  }
  r.lhs -= volume_sum;
  r.threshold =
      kGlobalTol * (1.0 + std::abs(r.lhs) + std::abs(r.A) + std::abs(r.B) + std::abs(r.C));
  return r;
}

void write_diagnostic_rows_csv(const std::vector<DiagnosticRow>& rows, std::ostream& out) {
  out << "kind,slab,element,value,threshold,pass\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << r.slab << ',' << r.element << ',' << fmt17(r.value) << ','
        << fmt17(r.threshold) << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

}  // namespace stfv
