#pragma once

// Total discrete fluxes q_{K,e0}(u, v) on vertical faces and the induced numerical entropy fluxes.

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "stfv/entropy.hpp"
#include "stfv/forms.hpp"
#include "stfv/mesh.hpp"

namespace stfv {

enum class SchemeKind { lax_friedrichs, godunov };

std::string to_string(SchemeKind kind);
/// Accepts "lf", "lax_friedrichs", "godunov". Throws ConfigError.
SchemeKind parse_scheme_kind(const std::string& text);

/// Phi_{K,e0}(u) = sign * int_{e0} i* omega(u): the face flux seen from element K.
class FaceFlux {
 public:
  FaceFlux(const FluxField& flux, std::shared_ptr<const FaceQuadrature> quad, int sign,
           double sup_dphi, int face_id = -1);

  double phi(double u) const { return sign_ * quad_->flux(*flux_, u); }
  double dphi(double u) const { return sign_ * quad_->flux_du(*flux_, u); }
  /// Face integral of an entropy form, K-outward.
  double phi_of(const FluxField& form, double u) const { return sign_ * quad_->flux(form, u); }

  int sign() const { return sign_; }
  double sup_dphi() const { return sup_dphi_; }
  int face_id() const { return face_id_; }
  const FluxField& flux() const { return *flux_; }
  const FaceQuadrature& quadrature() const { return *quad_; }
  /// The same face seen from the neighbor.
  FaceFlux opposite() const { return FaceFlux(*flux_, quad_, -sign_, sup_dphi_, face_id_); }

 private:
  const FluxField* flux_;
  std::shared_ptr<const FaceQuadrature> quad_;
  int sign_;
  double sup_dphi_;
  int face_id_;
};

/// Face flux of local face `local` of element k in a slab.
FaceFlux mesh_face_flux(const FoliatedMesh& mesh, int slab, int k, int local);
/// Face flux of vertical face f seen with its stored orientation (+1).
FaceFlux mesh_face_flux_raw(const FoliatedMesh& mesh, int slab, int f);

struct SchemeOptions {
  /// Multiplies the LF coefficient; values below 1 break monotonicity (fault injection).
  double lf_lambda_scale = 1.0;
  int godunov_grid = 2048;
};

class TotalFluxScheme {
 public:
  TotalFluxScheme(SchemeKind kind, StateRange u_range, SchemeOptions options = {});

  SchemeKind kind() const { return kind_; }
  const StateRange& u_range() const { return range_; }
  const SchemeOptions& options() const { return options_; }

  double evaluate(const FaceFlux& face, double u, double v) const;
  /// lambda_{e0} = scale * 1.1 * sampled sup |Phi'|.
  double lambda(const FaceFlux& face) const;
  /// Grid node j of the Godunov extremum search.
  double grid_point(int j) const;
  int grid_size() const { return options_.godunov_grid; }

 private:
  SchemeKind kind_;
  StateRange range_;
  SchemeOptions options_;
};

double lax_friedrichs_flux(const FaceFlux& face, double lambda, double u, double v);
double godunov_flux(const TotalFluxScheme& scheme, const FaceFlux& face, double u, double v);

/// Q(u, v, c) = q(max(u,c), max(v,c)) - q(min(u,c), min(v,c)).
double kruzkov_numerical_flux(const TotalFluxScheme& scheme, const FaceFlux& face, double u,
                              double v, double c);

/// Numerical entropy flux Q_{K,e0}(u, v) for a Kruzkov or convex entropy. For convex U it is
/// the U''-weighted superposition of Kruzkov fluxes normalized so that Q(u,u) = int i* Omega(u)
/// with Omega(0) = 0.
double numerical_entropy_flux(const TotalFluxScheme& scheme, const FaceFlux& face,
                              const Entropy& entropy, double u, double v);

/// Precomputed Phi on the Godunov grid with O(1) range extremum queries. Produces values
/// bit-identical to godunov_flux for the same face.
class GodunovFaceCache {
 public:
  GodunovFaceCache(const TotalFluxScheme& scheme, const FaceFlux& face);
  double evaluate(double u, double v) const;

 private:
  struct Table {
    std::vector<std::vector<int>> levels;
    int argmin(int lo, int hi, const std::vector<double>& value) const;
  };
  const TotalFluxScheme* scheme_;
  const FaceFlux* face_;
  std::vector<double> plus_;   // Phi on the grid
  std::vector<double> minus_;  // -Phi on the grid
  Table plus_table_;
  Table minus_table_;
};

struct FluxPropertyFailure {
  std::string property;  // consistency | conservation | monotonicity_u | monotonicity_v
  int slab = -1;
  int face = -1;
  double u = 0.0;
  double v = 0.0;
  double residual = 0.0;
  double threshold = 0.0;
};

struct FluxPropertyReport {
  int faces_checked = 0;
  long samples = 0;
  double max_consistency = 0.0;   // scale-relative residuals
  double max_conservation = 0.0;
  double min_du = 0.0;            // most negative scaled d_u q
  double max_dv = 0.0;            // most positive scaled d_v q
  long failure_count = 0;
  std::vector<FluxPropertyFailure> failures;  // first witnesses, capped
  bool pass() const { return failure_count == 0; }
  void merge(const FluxPropertyReport& other);
};

/// Randomized certification of consistency, conservation and monotonicity for one face.
/// `face` is seen from one adjacent element; conservation uses `face.opposite()`.
FluxPropertyReport check_flux_properties(const TotalFluxScheme& scheme, const FaceFlux& face,
                                         int n_samples, std::uint64_t seed, int slab = -1);

/// Runs check_flux_properties over every vertical face of the listed slabs.
FluxPropertyReport check_mesh_flux_properties(const TotalFluxScheme& scheme,
                                              const FoliatedMesh& mesh,
                                              const std::vector<int>& slabs, int n_samples,
                                              std::uint64_t seed);

/// Slabs whose faces must be certified: every slab for moving meshes, else first and last
/// (static slabs of a time-independent field are congruent).
std::vector<int> certification_slabs(const FoliatedMesh& mesh);

/// property,slab,face,u,v,residual,threshold
void write_flux_properties_csv(const FluxPropertyReport& report, std::ostream& out);

}  // namespace stfv
