#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "stfv/errors.hpp"
#include "stfv/mesh.hpp"
#include "stfv/scenarios.hpp"

using namespace stfv;
using namespace testing;

namespace {

std::shared_ptr<const FluxField> burgers() { return make_scenario("flat-burgers-1d").flux; }

std::shared_ptr<const FluxField> advection() { return make_scenario("torus-advection-2d").flux; }

// int_{e+} omega(u) - int_{e-} omega(u) + sum_{e0} (K-outward) int_{e0} omega(u), relative to |e+|.
double stokes_residual(const FoliatedMesh& m, int slab, int k, double u) {
  const QuadratureRule& q = m.quadrature();
  double r = pullback_integral(m.flux(), m.upper_face(slab, k), u, q) -
             pullback_integral(m.flux(), m.lower_face(slab, k), u, q);
  for (const FaceRef& ref : m.cell(k).faces) {
    r += ref.sign * pullback_integral(m.flux(), m.vertical_face(slab, ref.face), u, q);
  }
  return std::abs(r) / m.e_plus(slab, k);
}

std::vector<std::shared_ptr<const FoliatedMesh>> shipped_meshes() {
  std::vector<std::shared_ptr<const FoliatedMesh>> out;
  for (const auto& id : scenario_registry()) out.push_back(make_scenario(id).build_mesh());
  return out;
}

}  // namespace

TEST_SUITE("mesh") {

TEST_CASE("uniform 1D mesh obeys the flat CFL bound") {
  const FoliatedMesh m = build_mesh_1d(10, 0.5, 0.5, burgers());
  CHECK(m.num_cells() == 10);
  CHECK(m.tau_max() <= 0.5 * 0.1 / 1.0 + 1e-12);
  for (int s = 0; s < m.num_slabs(); ++s) {
    for (int k = 0; k < m.num_cells(); ++k) {
      CHECK(m.cell(k).faces.size() == 2);
      CHECK(m.cfl_margin(s, k) <= 0.5 + 1e-12);
    }
  }
}

TEST_CASE("static mesh: lower and upper faces are congruent") {
  const FoliatedMesh m = build_mesh_1d(12, 0.5, 0.3, burgers());
  CHECK_FALSE(m.moving());
  for (int s = 0; s < m.num_slabs(); ++s) {
    for (int k = 0; k < m.num_cells(); ++k) {
      CHECK(near(m.e_minus(s, k), m.e_plus(s, k), 1e-15));
      const FacePatch lower = m.lower_face(s, k);
      const FacePatch upper = m.upper_face(s, k);
      const auto lo = lower.corners();
      const auto hi = upper.corners();
      for (std::size_t c = 0; c < lo.size(); ++c) CHECK(lo[c][1] == hi[c][1]);
    }
  }
}

TEST_CASE("construction preconditions") {
  CHECK_THROWS_AS(build_mesh_1d(2, 0.5, 0.5, burgers()), MeshError);
  CHECK_THROWS_AS(build_mesh_1d(10, 1.5, 0.5, burgers()), MeshError);
  CHECK_THROWS_AS(build_mesh_1d(10, 0.5, -1.0, burgers()), MeshError);
  CHECK_THROWS_AS(build_mesh_2d_torus(1, 8, 0.5, 0.1, advection()), MeshError);
  CHECK_THROWS_AS(build_mesh_1d(10, 0.5, 0.5, advection()), MeshError);
  SUBCASE("a forced slab count that violates CFL is refused with the margin") {
    MeshOptions o;
    o.num_slabs = 1;
    try {
      build_mesh_1d(10, 0.5, 2.0, burgers(), {}, o);
      FAIL("expected CflError");
    } catch (const CflError& e) {
      CHECK(e.margin() > 0.5);
    }
  }
}

TEST_CASE("2D torus mesh counts") {
  const FoliatedMesh m = build_mesh_2d_torus(8, 8, 0.5, 0.1, advection());
  CHECK(m.num_cells() == 64);
  CHECK(m.num_faces() == 128);
  for (int k = 0; k < m.num_cells(); ++k) CHECK(m.cell(k).faces.size() == 4);
  for (int s = 0; s < m.num_slabs(); ++s) {
    for (int k = 0; k < m.num_cells(); ++k) CHECK(m.cfl_margin(s, k) < 1.0);
  }
}

TEST_CASE("every shipped mesh validates") {
  for (const auto& m : shipped_meshes()) {
    const MeshValidationReport r = validate_mesh(*m);
    CHECK(r.pass());
    CHECK(r.max_stokes_residual <= 1e-10);
    CHECK(near(r.recomputed_h, m->h(), 1e-15));
    const HyperbolicityReport h = validate_hyperbolicity(*m, m->flux());
    CHECK(h.pass);
    CHECK(h.c_lower > 0.0);
    CHECK(h.max_cfl_margin <= 0.5 + 1e-12);
  }
}

TEST_CASE("fault injection: corrupted neighbor id is reported") {
  FoliatedMesh m = build_mesh_1d(10, 0.5, 0.2, burgers());
  m.mutable_cell(3).faces[0].neighbor = 7;
  const MeshValidationReport r = validate_mesh(m);
  CHECK_FALSE(r.pass());
  CHECK(std::any_of(r.violations.begin(), r.violations.end(),
                    [](const MeshViolation& v) { return v.kind == "adjacency" && v.element == 3; }));
}

TEST_CASE("fault injection: flipped orientation sign is reported") {
  FoliatedMesh m = build_mesh_1d(10, 0.5, 0.2, burgers());
  m.mutable_cell(5).faces[1].sign *= -1;
  CHECK_FALSE(validate_mesh(m).pass());
}

TEST_CASE("constant-state Stokes identity, recomputed from face integrals") {
  for (const auto& m : shipped_meshes()) {
    const int slabs[] = {0, m->num_slabs() / 2, m->num_slabs() - 1};
    for (int s : slabs) {
      for (int k = 0; k < m->num_cells(); ++k) {
        for (double u : {-0.9, -0.3, 0.37, 0.8}) CHECK(stokes_residual(*m, s, k, u) <= 1e-10);
      }
    }
  }
  const FoliatedMesh flat = build_mesh_1d(16, 0.5, 0.25, burgers());
  for (int k = 0; k < flat.num_cells(); ++k) CHECK(stokes_residual(flat, 0, k, 0.37) <= 1e-12);
}

TEST_CASE("hyperbolicity bounds of the flat and variable-density meshes") {
  for (const char* id : {"flat-burgers-1d", "variable-density-1d"}) {
    const auto m = make_scenario(id).build_mesh();
    const HyperbolicityReport h = validate_hyperbolicity(*m, m->flux());
    CHECK(near(h.c_lower, 1.0, 1e-12));
    CHECK(near(h.c_upper, 1.0, 1e-12));
  }
}

TEST_CASE("finite-difference slopes of slice fluxes stay within the reported bounds") {
  for (const auto& m : shipped_meshes()) {
    const HyperbolicityReport h = validate_hyperbolicity(*m, m->flux());
    const int slices[] = {0, m->num_slabs()};
    for (int i : slices) {
      for (int k = 0; k < m->num_cells(); k += 7) {
        const FacePatch e = m->slice_face(i, k);
        for (double u : {-0.95, 0.0, 0.6}) {
          const double d = 1e-6;
          const double slope = (averaged_flux(m->flux(), e, u + d, m->quadrature()) -
                                averaged_flux(m->flux(), e, u - d, m->quadrature())) / (2 * d);
          CHECK(slope >= h.c_lower - 1e-7);
          CHECK(slope <= h.c_upper + 1e-7);
        }
      }
    }
  }
}

TEST_CASE("conforming tiling of every slice") {
  for (const auto& m : shipped_meshes()) {
    if (m->space_dim() != 1) continue;
    for (int i = 0; i <= m->num_slabs(); i += std::max(1, m->num_slabs() / 5)) {
      std::vector<std::pair<double, double>> iv;
      for (int k = 0; k < m->num_cells(); ++k) {
        const FacePatch e = m->slice_face(i, k);
        const auto c = e.corners();
        iv.emplace_back(c[0][1], c[1][1]);
      }
      std::sort(iv.begin(), iv.end());
      double total = 0.0;
      for (std::size_t k = 0; k < iv.size(); ++k) {
        CHECK(iv[k].second > iv[k].first);
        total += iv[k].second - iv[k].first;
        if (k + 1 < iv.size()) CHECK(iv[k].second == iv[k + 1].first);  // no gaps, no overlap
      }
      CHECK(near(total, 1.0, 1e-14));
    }
  }
  const auto torus = make_scenario("torus-advection-2d").build_mesh();
  double area = 0.0;
  for (int k = 0; k < torus->num_cells(); ++k) {
    const FacePatch e = torus->slice_face(0, k);
    const auto c = e.corners();
    area += (c[1][1] - c[0][1]) * (c[2][2] - c[0][2]);
  }
  CHECK(near(area, 1.0, 1e-14));
}

TEST_CASE("every vertical face is seen once with each sign") {
  for (const auto& m : shipped_meshes()) {
    std::vector<int> sign_sum(m->num_faces(), 0);
    std::vector<int> seen(m->num_faces(), 0);
    for (int k = 0; k < m->num_cells(); ++k) {
      for (const FaceRef& r : m->cell(k).faces) {
        sign_sum[r.face] += r.sign;
        ++seen[r.face];
        const auto& f = m->face(r.face);
        CHECK((f.cells[0] == k || f.cells[1] == k));
        CHECK(r.neighbor == (f.cells[0] == k ? f.cells[1] : f.cells[0]));
      }
    }
    for (int f = 0; f < m->num_faces(); ++f) {
      CHECK(seen[f] == 2);
      CHECK(sign_sum[f] == 0);
    }
  }
}

TEST_CASE("reported h is the largest spacelike-face diameter") {
  for (const auto& m : shipped_meshes()) {
    double h = 0.0;
    for (int i = 0; i <= m->num_slabs(); ++i) {
      for (int k = 0; k < m->num_cells(); ++k) {
        const FacePatch e = m->slice_face(i, k);
        const auto c = e.corners();
        for (std::size_t a = 0; a < c.size(); ++a) {
          for (std::size_t b = a + 1; b < c.size(); ++b) {
            double d2 = 0.0;
            for (int j = 1; j <= m->space_dim(); ++j) d2 += (c[a][j] - c[b][j]) * (c[a][j] - c[b][j]);
            h = std::max(h, std::sqrt(d2));
          }
        }
      }
    }
    CHECK(near(h, m->h(), 1e-15));
  }
}

TEST_CASE("slab lengths respect the ratio bound") {
  for (const auto& m : shipped_meshes()) CHECK(m->tau_max() / m->tau_min() <= m->tau_ratio_bound());
}

TEST_CASE("moving mesh: element ids carry across slabs") {
  const auto m = make_scenario("moving-mesh-burgers-1d").build_mesh();
  CHECK(m->moving());
  for (int s = 0; s + 1 < m->num_slabs(); ++s) {
    for (int k = 0; k < m->num_cells(); ++k) {
      const int n = m->next_cell(s, k);
      const FacePatch upper = m->upper_face(s, k);
      const FacePatch lower = m->lower_face(s + 1, n);
      const auto up = upper.corners();
      const auto lo = lower.corners();
      CHECK(up[0][1] == lo[0][1]);
      CHECK(up[1][1] == lo[1][1]);
    }
  }
  SUBCASE("vertical faces are straight segments between slice endpoints") {
    const int s = m->num_slabs() / 3;
    for (int f = 0; f < m->num_faces(); ++f) {
      const FacePatch e = m->vertical_face(s, f);
      const auto c = e.corners();
      CHECK(c[0][0] == m->slice_times()[s]);
      CHECK(c[1][0] == m->slice_times()[s + 1]);
    }
  }
}

TEST_CASE("refinement sequence") {
  RefinementConfig rc;
  rc.base_cells = 20;
  rc.T = 0.4;
  rc.flux = burgers();
  const auto levels = refinement_sequence(rc, 3);
  REQUIRE(levels.size() == 3);
  CHECK(levels[0].cells == 20);
  CHECK(levels[1].cells == 40);
  CHECK(levels[2].cells == 80);
  for (std::size_t l = 1; l < levels.size(); ++l) {
    const double r = levels[l - 1].ratio_tau2_over_h / levels[l].ratio_tau2_over_h;
    CHECK(r > 1.8);
    CHECK(r < 2.2);
    CHECK(levels[l].ratio_mixed_over_tau_min < levels[l - 1].ratio_mixed_over_tau_min);
    CHECK(near(levels[l].h, 0.5 * levels[l - 1].h, 1e-15));
  }
  CHECK_THROWS_AS(refinement_sequence(rc, 1), MeshError);
}

TEST_CASE("mesh summary CSV has one row per element and slab") {
  const FoliatedMesh m = build_mesh_1d(5, 0.5, 0.1, burgers());
  std::ostringstream os;
  write_mesh_summary_csv(m, os);
  const std::string text = os.str();
  CHECK(text.rfind("slab,element,e_minus,e_plus,n_k,cfl_margin\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + m.num_slabs() * m.num_cells());
}

}  // TEST_SUITE
