#pragma once

// Discrete entropy quantities of a computed trajectory: face and element entropy residuals,
// the balance between two slices, the global dissipation sum, the Kruzkov contraction
// distance and the terms of the global entropy inequality against a test function.

#include <ostream>
#include <string>
#include <vector>

#include "stfv/entropy.hpp"
#include "stfv/solver.hpp"

namespace stfv {

/// A scalar checked as value <= threshold.
struct Residual {
  double value = 0.0;
  double threshold = 0.0;
  bool pass() const { return value <= threshold; }
};

/// phi^Omega(u~) - phi^Omega(u_K^-) + (N_K / |e_K^+|) (Q(u_K^-, u_nb^-) - Q(u_K^-, u_K^-)) for
/// local face j of element k, with phi^Omega averaged over e_K^+. Threshold 1e-9 (1 + |phi^Omega(u_K^-)|).
/// Throws ConfigError when the trajectory did not record intermediates.
Residual face_entropy_residual(const Trajectory& traj, int slab, int k, int j,
                               const EntropyFluxField& entropy);

/// |e_K^+| (phi^Omega(u_K^+) - phi^Omega(u_K^-)) + sum_j (Q(u_K^-, u_nb^-) - Q(u_K^-, u_K^-)).
/// Threshold 1e-9 |e_K^+| (1 + |phi^Omega(u_K^-)|).
Residual element_entropy_residual(const Trajectory& traj, int slab, int k,
                                  const EntropyFluxField& entropy);

/// Output row: kind,slab,element,value,threshold,pass.
struct DiagnosticRow {
  std::string kind;
  int slab = -1;
  int element = -1;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

struct ResidualSweep {
  std::string kind;
  long checked = 0;
  long failures = 0;
  double max_value = 0.0;  // largest raw residual
  double max_excess = 0.0; // largest value - threshold (negative when everything passes)
  std::vector<DiagnosticRow> rows;  // per-slab maxima, then failure witnesses (capped)
  bool pass() const { return failures == 0; }
};

/// Every (slab, element, face) of the trajectory.
ResidualSweep sweep_face_residuals(const Trajectory& traj, const EntropyFluxField& entropy,
                                   const std::string& kind);
/// Every (slab, element) of the trajectory.
ResidualSweep sweep_element_residuals(const Trajectory& traj, const EntropyFluxField& entropy,
                                      const std::string& kind);

struct EntropyResidualSweeps {
  ResidualSweep face;
  ResidualSweep element;
};

/// Both sweeps in one pass (the numerical entropy fluxes are shared). Row kinds are
/// "face_<label>" and "element_<label>".
EntropyResidualSweeps sweep_entropy_residuals(const Trajectory& traj,
                                              const EntropyFluxField& entropy,
                                              const std::string& label);

/// Sampled convexity of V = phi^Omega o (phi^omega)^{-1} on every upper face, over a 128-point
/// grid spanning the states reached by the trajectory. c is the sampled lower slope of phi^omega
/// on the same grid; it converts |phi(u~) - phi(u+)|^2 into |u~ - u+|^2.
struct ConvexityEstimate {
  StateRange range;
  double beta = 0.0;     // min over elements
  double c_lower = 0.0;  // min over elements
  std::vector<std::vector<double>> beta_element;  // [slab][element]
  std::vector<std::vector<double>> c_element;     // [slab][element]
  bool degenerate() const { return !(beta > 0.0); }
};

ConvexityEstimate estimate_convexity(const Trajectory& traj, const EntropyFluxField& entropy);

/// Slice entropy totals and per-slab dissipation sums, reusable across (i, j) pairs.
struct BalanceTable {
  std::vector<double> slice_entropy;  // sum_K |e| phi^Omega_e(u) on slice i
  std::vector<double> slab_dissipation;  // sum_{K,j} c_K^2 |e_K^+| / (2 N_K) |u~ - u_K^+|^2
  std::vector<double> slab_dissipation_local;  // same with beta_K c_K^2 in place of c_K^2
};

BalanceTable make_balance_table(const Trajectory& traj, const EntropyFluxField& entropy,
                                const ConvexityEstimate& convexity);

struct BalanceResult {
  int i = 0;
  int j = 0;
  double lhs = 0.0;  // entropy on slice j
  double rhs = 0.0;  // entropy on slice i
  double dissipation = 0.0;
  double threshold = 0.0;
  bool degenerate_beta = false;
  bool pass = false;  // lhs + dissipation <= rhs + threshold
};

/// Balance between slices i <= j with the dissipation of slabs i..j-1 weighted by beta. A
/// non-positive beta is flagged degenerate and replaced by 0. Throws DomainError for bad indices.
BalanceResult entropy_balance(const BalanceTable& table, int i, int j, double beta);
/// Same, using per-element moduli beta_K in place of a global beta.
BalanceResult entropy_balance_local(const BalanceTable& table, int i, int j);
BalanceResult entropy_balance(const Trajectory& traj, int i, int j, const EntropyFluxField& entropy,
                              double beta);

struct DissipationEstimate {
  double lhs_sum = 0.0;          // sum (|e_K^+| / N_K) |u~ - u_K^+|^2
  double initial_entropy = 0.0;  // integral over H_0 of Omega(u0), quadratic U = u^2 / 2
  double ratio = 0.0;            // lhs_sum / initial_entropy (0 when both vanish)
};

DissipationEstimate dissipation_estimate(const Trajectory& traj, const InitialData& u0);

/// sum_K integral over e_K of the Kruzkov form Omega(u_K, v_K). Throws DomainError for states
/// on different slices or of the wrong size.
double contraction_distance(const FoliatedMesh& mesh, const SliceState& u, const SliceState& v);
/// Distance per slice of two trajectories on the same mesh.
std::vector<double> contraction_series(const Trajectory& u, const Trajectory& v);

/// psi(t, x) = chi(t) prod_k b(d_k) with chi(t) = (1 - (t/t_cut)^2)^3 on [0, t_cut),
/// b(d) = (1 - (d/r)^2)^3 on d < r and d_k the periodic distance to the center. C^2, >= 0.
class TestFunction {
 public:
  TestFunction(int space_dim, double t_cut, SpacePoint center, double radius);

  double operator()(const Point& x) const;
  /// (d_t psi, d_1 psi, ..., d_n psi).
  Point gradient(const Point& x) const;
  double t_cut() const { return t_cut_; }
  /// True when psi is zero on the spatial box [lo, hi] (chart coordinates, unwrapped).
  bool vanishes_on_box(const SpacePoint& lo, const SpacePoint& hi) const;
  std::string describe() const;
  /// Throws DomainError unless psi vanishes on the last two slabs of the mesh.
  void check_support(const FoliatedMesh& mesh) const;

 private:
  int n_;
  double t_cut_;
  SpacePoint center_;
  double r_;
};

struct GlobalInequalityTerms {
  double lhs = 0.0;
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
  double threshold = 0.0;
  bool pass() const { return lhs <= A + B + C + threshold; }
};

/// lhs = -sum_K int_K dpsi ^ Omega(u_K^-) - sum_{slab 0} int_{e_K^-} psi Omega(u_{K,0}) and the
/// terms A, B, C; face averages of psi use the Euclidean area element of the chart. Requires
/// a geometry-compatible flux and recorded intermediates. Threshold 1e-8 (1 + |lhs| + |A| + |B| + |C|).
GlobalInequalityTerms global_inequality_terms(const Trajectory& traj, const TestFunction& psi,
                                              const EntropyFluxField& entropy);

void write_diagnostic_rows_csv(const std::vector<DiagnosticRow>& rows, std::ostream& out);

}  // namespace stfv
