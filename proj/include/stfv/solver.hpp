#pragma once

// Slab-by-slab marching of |e+| phi_{e+}(u+) = |e-| phi_{e-}(u-) - sum_{e0} q_{K,e0}(u-, u_nb-).

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "stfv/mesh.hpp"
#include "stfv/numflux.hpp"

namespace stfv {

struct SolverConfig {
  double inversion_tol = 1e-12;
  bool record_intermediates = false;
  /// Throws ConfigError when the tolerance is outside (0, 1e-6].
  void validate() const;
};

/// One value per element of a slab, living on the lower faces (or on the final slice).
struct SliceState {
  int slab = 0;
  double time = 0.0;
  std::vector<double> u;
};

/// Initial data u0(x) on the chart point (t = 0, x).
using InitialData = std::function<double(const Point& x)>;

struct ProjectionResult {
  SliceState state;
  std::vector<std::string> warnings;
};

ProjectionResult project_initial_data(const FoliatedMesh& mesh, const InitialData& u0,
                                      const SolverConfig& config = {});

struct StepResult {
  double u_plus = 0.0;
  std::vector<double> intermediates;  // one per vertical face, in the element's face order
};

/// Refuses (CflError) when the element's CFL margin exceeds 1.
StepResult step_element(const FoliatedMesh& mesh, int slab, int k, const SliceState& state,
                        const TotalFluxScheme& scheme, const SolverConfig& config);

struct AdvanceResult {
  SliceState next;
  std::vector<std::vector<double>> intermediates;  // [element][local face], empty unless recorded
};

/// All elements of the state's slab; the result is indexed by the next slab's elements.
/// Either every element succeeds or the call throws with the failing element named.
AdvanceResult advance_slice(const FoliatedMesh& mesh, const SliceState& state,
                            const TotalFluxScheme& scheme, const SolverConfig& config);

class Trajectory {
 public:
  Trajectory(std::shared_ptr<const FoliatedMesh> mesh, TotalFluxScheme scheme, SolverConfig config);

  const FoliatedMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const FoliatedMesh> mesh_ptr() const { return mesh_; }
  const FluxField& flux() const { return mesh_->flux(); }
  const TotalFluxScheme& scheme() const { return scheme_; }
  const SolverConfig& config() const { return config_; }

  const std::vector<SliceState>& states() const { return states_; }
  const SliceState& state(int i) const { return states_[i]; }
  bool has_intermediates() const { return !intermediates_.empty(); }
  /// u_K^- and u_K^+ of element k in a slab.
  double u_minus(int slab, int k) const { return states_[slab].u[k]; }
  double u_plus(int slab, int k) const { return states_[slab + 1].u[mesh_->next_cell(slab, k)]; }
  /// Intermediate value of local face j of element k; throws ConfigError if not recorded.
  double intermediate(int slab, int k, int j) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  void push(SliceState state, std::vector<std::vector<double>> intermediates);
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::shared_ptr<const FoliatedMesh> mesh_;
  TotalFluxScheme scheme_;
  SolverConfig config_;
  std::vector<SliceState> states_;
  std::vector<std::vector<std::vector<double>>> intermediates_;  // [slab][element][face]
  std::vector<std::string> warnings_;
};

Trajectory run(std::shared_ptr<const FoliatedMesh> mesh, const TotalFluxScheme& scheme,
               const InitialData& u0, const SolverConfig& config = {});

/// Same, starting from a given slab-0 state.
Trajectory run_from_state(std::shared_ptr<const FoliatedMesh> mesh, const TotalFluxScheme& scheme,
                          SliceState initial, const SolverConfig& config = {});

/// Value u_K^- of the prism containing (t, x). On a slice time t_i the slab-i (upper) prism
/// is used, and the final slice uses the final state. Ties between elements go to the
/// smaller id. Throws DomainError outside [0, T].
double reconstruct(const Trajectory& trajectory, double t, const Point& x);

/// sum_K |e_K| phi_{e_K}(u_K) over slice i.
double slice_total(const FoliatedMesh& mesh, int slice, const std::vector<double>& u);

/// slab,time,element,u
void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);
/// slab,element,face,u_tilde
void write_intermediates_csv(const Trajectory& trajectory, std::ostream& out);

}  // namespace stfv
