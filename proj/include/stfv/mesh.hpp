#pragma once

// Foliated prism meshes on [0,T] x S^1 and [0,T] x T^2.
//
// All slabs share one topology: cells (with their vertex ids and vertical-face references)
// and vertical faces. Geometry per slice is a list of vertex positions. The periodic seam
// is handled with image vertices (x_N = x_0 + 1), so each cell is a non-wrapping interval
// or rectangle in the chart; seam vertical faces use the base representation.

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stfv/forms.hpp"

namespace stfv {

using SpacePoint = std::array<double, kMaxSpaceDim>;

/// Reference from a cell to one of its vertical faces.
struct FaceRef {
  int face = -1;
  int neighbor = -1;
  /// Sign turning the face's stored parametrization into the K-outward orientation.
  int sign = 0;
};

struct Cell {
  std::vector<int> vertices;  // 2^n corner vertex ids, bit k of the index selects the high side on axis k
  std::vector<FaceRef> faces;
};

struct VerticalFace {
  std::vector<int> vertices;  // 2^(n-1) slice vertices; reference axis 0 of the face is time
  std::array<int, 2> cells{-1, -1};
};

struct MeshOptions {
  int quadrature_points = 5;
  std::optional<int> num_slabs;
  double tau_ratio_bound = 4.0;
};

/// Node velocity v(t, x) for 1+1 moving meshes.
using MotionFn = std::function<double(double t, double x)>;

class FoliatedMesh {
 public:
  int space_dim() const { return n_; }
  int num_slabs() const { return static_cast<int>(times_.size()) - 1; }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }
  int num_vertices() const { return num_vertices_; }
  const std::vector<double>& slice_times() const { return times_; }
  double tau(int slab) const { return times_[slab + 1] - times_[slab]; }
  double tau_max() const;
  double tau_min() const;
  double h() const { return h_; }
  bool moving() const { return moving_; }
  const std::vector<int>& cells_per_axis() const { return cells_per_axis_; }
  double tau_ratio_bound() const { return tau_ratio_bound_; }

  const FluxField& flux() const { return *flux_; }
  std::shared_ptr<const FluxField> flux_ptr() const { return flux_; }
  const QuadratureRule& quadrature() const { return quad_; }

  const Cell& cell(int k) const { return cells_[k]; }
  const VerticalFace& face(int f) const { return faces_[f]; }
  const SpacePoint& vertex(int slice, int v) const { return positions_[slice][v]; }

  /// Spacelike face of cell k on slice i (e_K^- of slab i, e_K^+ of slab i-1).
  FacePatch slice_face(int slice, int k) const;
  FacePatch lower_face(int slab, int k) const { return slice_face(slab, k); }
  FacePatch upper_face(int slab, int k) const { return slice_face(slab + 1, k); }
  /// Vertical face f of a slab in its stored parametrization (orientation +1).
  FacePatch vertical_face(int slab, int f) const;
  VolumePatch volume(int slab, int k) const;

  /// |e| of cell k on slice i.
  double slice_measure(int slice, int k) const { return measures_[slice][k]; }
  double e_minus(int slab, int k) const { return measures_[slab][k]; }
  double e_plus(int slab, int k) const { return measures_[slab + 1][k]; }
  double cfl_margin(int slab, int k) const { return margins_[slab][k]; }
  /// Sampled sup_u |d_u int_{e0} omega(u)| of vertical face f in a slab.
  double sup_dphi(int slab, int f) const { return sup_dphi_[slab][f]; }
  /// Element of slab i+1 whose lower face is the upper face of k.
  int next_cell(int slab, int k) const { return next_[slab][k]; }
  int max_faces_per_cell() const;

  /// Fault-injection access for validator tests.
  Cell& mutable_cell(int k) { return cells_[k]; }

 private:
  friend class MeshBuilder;

  int n_ = 1;
  int num_vertices_ = 0;
  bool moving_ = false;
  std::vector<int> cells_per_axis_;
  std::shared_ptr<const FluxField> flux_;
  QuadratureRule quad_ = QuadratureRule::gauss_legendre(5);
  std::vector<double> times_;
  std::vector<std::vector<SpacePoint>> positions_;  // [slice][vertex]
  std::vector<Cell> cells_;
  std::vector<VerticalFace> faces_;
  std::vector<std::vector<double>> measures_;  // [slice][cell]
  std::vector<std::vector<double>> margins_;   // [slab][cell]
  std::vector<std::vector<double>> sup_dphi_;  // [slab][face]
  std::vector<std::vector<int>> next_;         // [slab][cell]
  double h_ = 0.0;
  double tau_ratio_bound_ = 4.0;
};

/// Circle slices split into num_cells intervals. Throws MeshError / CflError.
FoliatedMesh build_mesh_1d(int num_cells, double cfl_fraction, double T,
                           std::shared_ptr<const FluxField> flux, const MotionFn& motion = {},
                           const MeshOptions& options = {});

FoliatedMesh build_mesh_2d_torus(int nx, int ny, double cfl_fraction, double T,
                                 std::shared_ptr<const FluxField> flux,
                                 const MeshOptions& options = {});

struct MeshViolation {
  std::string kind;  // tiling | adjacency | orientation | stokes | measure | ratio | diameter | topology
  int slab = -1;
  int element = -1;
  std::string detail;
};

struct MeshValidationReport {
  std::vector<MeshViolation> violations;
  double max_stokes_residual = 0.0;  // relative to |e_K^+|
  double recomputed_h = 0.0;
  bool pass() const { return violations.empty(); }
};

MeshValidationReport validate_mesh(const FoliatedMesh& mesh);

struct HyperbolicityReport {
  double c_lower = 0.0;
  double c_upper = 0.0;
  double max_cfl_margin = 0.0;
  int worst_slab = -1;
  int worst_element = -1;
  bool pass = false;
};

/// Slopes of the averaged fluxes over all spacelike faces (64 state samples) and recomputed
/// CFL margins for every element.
HyperbolicityReport validate_hyperbolicity(const FoliatedMesh& mesh, const FluxField& flux);

/// CFL margin of element k in a slab, computed from scratch.
double compute_cfl_margin(const FoliatedMesh& mesh, int slab, int k);

struct RefinementConfig {
  int dimension = 1;
  int base_cells = 20;  // per axis
  double cfl_fraction = 0.5;
  double T = 0.5;
  std::shared_ptr<const FluxField> flux;
  MotionFn motion;
  MeshOptions options;
};

struct RefinementLevel {
  FoliatedMesh mesh;
  int cells = 0;  // per axis
  double h = 0.0;
  double tau_max = 0.0;
  double tau_min = 0.0;
  double ratio_tau2_over_h = 0.0;       // tau_max^2 / h
  double ratio_mixed_over_tau_min = 0.0;  // (tau_max^2 + h^2) / tau_min
};

/// Level l has base_cells * 2^l cells per axis and N_0 * 2^l slabs, where N_0 is the slab
/// count chosen for level 0, so tau scales with h.
std::vector<RefinementLevel> refinement_sequence(const RefinementConfig& config, int levels);

/// One row per element: slab,element,e_minus,e_plus,n_k,cfl_margin.
void write_mesh_summary_csv(const FoliatedMesh& mesh, std::ostream& out);

}  // namespace stfv
