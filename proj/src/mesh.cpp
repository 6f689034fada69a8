#include "stfv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "stfv/csv.hpp"
#include "stfv/errors.hpp"

namespace stfv {

namespace {

constexpr int kStateSamples = 64;
constexpr int kMaxFacesPerCell = 64;

double state_sample(const StateRange& r, int k) {
  return r.lo + r.width() * static_cast<double>(k) / (kStateSamples - 1);
}

Point chart_point(double t, const SpacePoint& p) { return {t, p[0], p[1], p[2]}; }

double sup_abs_dphi(const FluxField& flux, const FaceQuadrature& fq) {
  double best = 0.0;
  for (int k = 0; k < kStateSamples; ++k) {
    best = std::max(best, std::abs(fq.flux_du(flux, state_sample(flux.u_range(), k))));
  }
  return best;
}

double inf_dphi(const FluxField& flux, const FaceQuadrature& fq, double measure) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kStateSamples; ++k) {
    best = std::min(best, fq.flux_du(flux, state_sample(flux.u_range(), k)) / measure);
  }
  return best;
}

std::string element_name(int slab, int k) {
  return "element " + std::to_string(k) + " of slab " + std::to_string(slab);
}

}  // namespace

// Builds topology and geometry; computes the caches.
class MeshBuilder {
 public:
  static FoliatedMesh topology_1d(int N, std::shared_ptr<const FluxField> flux, int q) {
    FoliatedMesh m;
    m.n_ = 1;
    m.cells_per_axis_ = {N};
    m.flux_ = std::move(flux);
    m.quad_ = QuadratureRule::gauss_legendre(q);
    m.num_vertices_ = N + 1;
    m.cells_.resize(N);
    m.faces_.resize(N);
    for (int j = 0; j < N; ++j) {
      m.faces_[j].vertices = {j};
      m.faces_[j].cells = {(j - 1 + N) % N, j};
    }
    for (int k = 0; k < N; ++k) {
      Cell& c = m.cells_[k];
      c.vertices = {k, k + 1};
      c.faces = {FaceRef{k, (k - 1 + N) % N, +1}, FaceRef{(k + 1) % N, (k + 1) % N, -1}};
    }
    return m;
  }

  static FoliatedMesh topology_2d(int nx, int ny, std::shared_ptr<const FluxField> flux, int q) {
    FoliatedMesh m;
    m.n_ = 2;
    m.cells_per_axis_ = {nx, ny};
    m.flux_ = std::move(flux);
    m.quad_ = QuadratureRule::gauss_legendre(q);
    m.num_vertices_ = (nx + 1) * (ny + 1);
    auto v = [nx](int i, int j) { return j * (nx + 1) + i; };
    auto cell_id = [nx, ny](int i, int j) { return ((j + ny) % ny) * nx + (i + nx) % nx; };
    auto fx = [nx, ny](int i, int j) { return ((j + ny) % ny) * nx + (i + nx) % nx; };
    auto fy = [nx, ny](int i, int j) { return nx * ny + ((j + ny) % ny) * nx + (i + nx) % nx; };
    m.cells_.resize(nx * ny);
    m.faces_.resize(2 * nx * ny);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        m.faces_[fx(i, j)].vertices = {v(i, j), v(i, j + 1)};
        m.faces_[fx(i, j)].cells = {cell_id(i - 1, j), cell_id(i, j)};
        m.faces_[fy(i, j)].vertices = {v(i, j), v(i + 1, j)};
        m.faces_[fy(i, j)].cells = {cell_id(i, j - 1), cell_id(i, j)};
        Cell& c = m.cells_[cell_id(i, j)];
        c.vertices = {v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1)};
        c.faces = {FaceRef{fx(i, j), cell_id(i - 1, j), +1},
                   FaceRef{fx(i + 1, j), cell_id(i + 1, j), -1},
                   FaceRef{fy(i, j), cell_id(i, j - 1), -1},
                   FaceRef{fy(i, j + 1), cell_id(i, j + 1), +1}};
      }
    }
    return m;
  }

  static std::vector<SpacePoint> base_positions(const FoliatedMesh& m) {
    std::vector<SpacePoint> p(m.num_vertices_);
    if (m.n_ == 1) {
      const int N = m.cells_per_axis_[0];
      for (int j = 0; j <= N; ++j) p[j] = {static_cast<double>(j) / N, 0.0, 0.0};
    } else {
      const int nx = m.cells_per_axis_[0];
      const int ny = m.cells_per_axis_[1];
      for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
          p[j * (nx + 1) + i] = {static_cast<double>(i) / nx, static_cast<double>(j) / ny, 0.0};
        }
      }
    }
    return p;
  }

  // 1D node motion over one slab, capped at a quarter of the smallest cell width.
  static std::vector<SpacePoint> advect(const FoliatedMesh& m, const std::vector<SpacePoint>& p,
                                        double t, double tau, const MotionFn& motion) {
    if (!motion || m.n_ != 1) return p;
    const int N = m.cells_per_axis_[0];
    double min_width = std::numeric_limits<double>::infinity();
    for (int j = 0; j < N; ++j) min_width = std::min(min_width, p[j + 1][0] - p[j][0]);
    const double cap = 0.25 * min_width;
    std::vector<SpacePoint> next = p;
    for (int j = 0; j < N; ++j) {
      const double d = std::clamp(tau * motion(t, p[j][0]), -cap, cap);
      next[j][0] = p[j][0] + d;
    }
    next[N][0] = next[0][0] + 1.0;
    return next;
  }

  static void set_geometry(FoliatedMesh& m, std::vector<double> times, const MotionFn& motion) {
    m.times_ = std::move(times);
    m.moving_ = static_cast<bool>(motion) && m.n_ == 1;
    m.positions_.clear();
    m.positions_.push_back(base_positions(m));
    for (int i = 0; i + 1 < static_cast<int>(m.times_.size()); ++i) {
      m.positions_.push_back(
          advect(m, m.positions_.back(), m.times_[i], m.times_[i + 1] - m.times_[i], motion));
    }
  }

  // Largest CFL margin over slab 0, used by the tau search.
  static double slab0_margin(const FoliatedMesh& m) {
    std::vector<double> sup(m.faces_.size());
    for (int f = 0; f < m.num_faces(); ++f) {
      sup[f] = sup_abs_dphi(*m.flux_, FaceQuadrature(m.vertical_face(0, f), m.quad_));
    }
    double worst = 0.0;
    for (int k = 0; k < m.num_cells(); ++k) {
      const FaceQuadrature up(m.upper_face(0, k), m.quad_);
      const double ep = face_measure(*m.flux_, up);
      double mx = 0.0;
      for (const FaceRef& r : m.cells_[k].faces) mx = std::max(mx, sup[r.face]);
      const double c = inf_dphi(*m.flux_, up, ep);
      const double margin = (c > 0.0) ? m.cells_[k].faces.size() * mx / (ep * c)
                                      : std::numeric_limits<double>::infinity();
      worst = std::max(worst, margin);
    }
    return worst;
  }

  static void compute_caches(FoliatedMesh& m) {
    const int slices = static_cast<int>(m.times_.size());
    m.measures_.assign(slices, std::vector<double>(m.num_cells()));
    std::vector<std::vector<double>> inf_slope(slices, std::vector<double>(m.num_cells()));
    m.h_ = 0.0;
    for (int i = 0; i < slices; ++i) {
      for (int k = 0; k < m.num_cells(); ++k) {
        const FacePatch patch = m.slice_face(i, k);
        const FaceQuadrature fq(patch, m.quad_);
        double measure = 0.0;
        try {
          measure = face_measure(*m.flux_, fq);
        } catch (const DegenerateFaceError& e) {
          throw MeshError("cell " + std::to_string(k) + " on slice " + std::to_string(i) + ": " +
                          e.what());
        }
        m.measures_[i][k] = measure;
        inf_slope[i][k] = inf_dphi(*m.flux_, fq, measure);
        m.h_ = std::max(m.h_, patch.spatial_diameter());
      }
    }
    const int slabs = slices - 1;
    m.sup_dphi_.assign(slabs, std::vector<double>(m.num_faces()));
    m.margins_.assign(slabs, std::vector<double>(m.num_cells()));
    for (int s = 0; s < slabs; ++s) {
      for (int f = 0; f < m.num_faces(); ++f) {
        m.sup_dphi_[s][f] = sup_abs_dphi(*m.flux_, FaceQuadrature(m.vertical_face(s, f), m.quad_));
      }
      for (int k = 0; k < m.num_cells(); ++k) {
        double mx = 0.0;
        for (const FaceRef& r : m.cells_[k].faces) mx = std::max(mx, m.sup_dphi_[s][r.face]);
        const double c = inf_slope[s + 1][k];
        m.margins_[s][k] = (c > 0.0) ? m.cells_[k].faces.size() * mx / (m.measures_[s + 1][k] * c)
                                     : std::numeric_limits<double>::infinity();
      }
    }
    compute_next(m);
  }

  // Matches each upper face of slab s to the lower face of slab s+1 with identical corners.
  static void compute_next(FoliatedMesh& m) {
    const int slabs = m.num_slabs();
    m.next_.assign(slabs, std::vector<int>(m.num_cells(), -1));
    for (int s = 0; s < slabs; ++s) {
      std::map<std::vector<double>, int> lower;
      for (int k = 0; k < m.num_cells(); ++k) {
        std::vector<double> key;
        for (int v : m.cells_[k].vertices) {
          const SpacePoint& p = m.positions_[s + 1][v];
          key.insert(key.end(), p.begin(), p.begin() + m.n_);
        }
        lower.emplace(std::move(key), k);
      }
      for (int k = 0; k < m.num_cells(); ++k) {
        std::vector<double> key;
        for (int v : m.cells_[k].vertices) {
          const SpacePoint& p = m.positions_[s + 1][v];
          key.insert(key.end(), p.begin(), p.begin() + m.n_);
        }
        const auto it = lower.find(key);
        if (it == lower.end()) {
          throw MeshError("no lower face in slab " + std::to_string(s + 1) +
                          " matches the upper face of " + element_name(s, k));
        }
        m.next_[s][k] = it->second;
      }
    }
  }

  static std::vector<double> uniform_times(double T, int N) {
    std::vector<double> t(N + 1);
    for (int i = 0; i <= N; ++i) t[i] = T * static_cast<double>(i) / N;
    t[N] = T;
    return t;
  }

  static void throw_cfl(const FoliatedMesh& m, double cfl) {
    for (int s = 0; s < m.num_slabs(); ++s) {
      for (int k = 0; k < m.num_cells(); ++k) {
        if (!(m.margins_[s][k] <= cfl)) {
          std::ostringstream os;
          os << "CFL violated at " << element_name(s, k) << ": margin " << m.margins_[s][k]
             << " exceeds " << cfl;
          throw CflError(os.str(), m.margins_[s][k]);
        }
      }
    }
  }

  static double max_margin(const FoliatedMesh& m) {
    double worst = 0.0;
    for (const auto& row : m.margins_) {
      for (double v : row) worst = std::max(worst, v);
    }
    return worst;
  }

  // Chooses the slab count and finalizes the mesh.
  static FoliatedMesh finish(FoliatedMesh m, double cfl, double T, const MotionFn& motion,
                             const MeshOptions& opt) {
    m.tau_ratio_bound_ = opt.tau_ratio_bound;
    if (opt.num_slabs) {
      if (*opt.num_slabs < 1) throw MeshError("num_slabs must be positive");
      set_geometry(m, uniform_times(T, *opt.num_slabs), motion);
      compute_caches(m);
      throw_cfl(m, cfl);
      return m;
    }
    auto margin_at = [&](double tau) {
      set_geometry(m, {0.0, tau}, motion);
      return slab0_margin(m);
    };
    // Bisection for the largest uniform tau meeting the CFL fraction on the first slab.
    double lo = 0.0;
    double hi = T;
    if (margin_at(hi) > cfl) {
      const double tiny = 1e-12 * T;
      const double m_tiny = margin_at(tiny);
      if (!(m_tiny <= cfl)) {
        set_geometry(m, {0.0, tiny}, motion);
        compute_caches(m);
        throw_cfl(m, cfl);
      }
      lo = tiny;
      for (int it = 0; it < 200 && hi - lo > 1e-4 * lo; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (margin_at(mid) <= cfl) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
    } else {
      lo = T;
    }
    int N = static_cast<int>(std::ceil(T / lo - 1e-12));
    N = std::max(N, 1);
    for (int attempt = 0; attempt < 60; ++attempt) {
      set_geometry(m, uniform_times(T, N), motion);
      compute_caches(m);
      if (max_margin(m) <= cfl) return m;
      N += std::max(1, N / 20);
    }
    throw_cfl(m, cfl);
    return m;
  }
};

// ---------------------------------------------------------------------------------------------

double FoliatedMesh::tau_max() const {
  double best = 0.0;
  for (int s = 0; s < num_slabs(); ++s) best = std::max(best, tau(s));
  return best;
}

double FoliatedMesh::tau_min() const {
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < num_slabs(); ++s) best = std::min(best, tau(s));
  return best;
}

int FoliatedMesh::max_faces_per_cell() const {
  std::size_t best = 0;
  for (const Cell& c : cells_) best = std::max(best, c.faces.size());
  return static_cast<int>(best);
}

FacePatch FoliatedMesh::slice_face(int slice, int k) const {
  std::array<Point, 8> corners{};
  const Cell& c = cells_[k];
  for (std::size_t i = 0; i < c.vertices.size(); ++i) {
    corners[i] = chart_point(times_[slice], positions_[slice][c.vertices[i]]);
  }
  return FacePatch(FaceKind::spacelike, n_, std::span<const Point>(corners.data(), c.vertices.size()));
}

FacePatch FoliatedMesh::vertical_face(int slab, int f) const {
  std::array<Point, 8> corners{};
  const VerticalFace& face = faces_[f];
  for (std::size_t i = 0; i < face.vertices.size(); ++i) {
    corners[2 * i] = chart_point(times_[slab], positions_[slab][face.vertices[i]]);
    corners[2 * i + 1] = chart_point(times_[slab + 1], positions_[slab + 1][face.vertices[i]]);
  }
  return FacePatch(FaceKind::vertical, n_,
                   std::span<const Point>(corners.data(), 2 * face.vertices.size()));
}

VolumePatch FoliatedMesh::volume(int slab, int k) const {
  std::array<Point, 16> corners{};
  const Cell& c = cells_[k];
  for (std::size_t i = 0; i < c.vertices.size(); ++i) {
    corners[2 * i] = chart_point(times_[slab], positions_[slab][c.vertices[i]]);
    corners[2 * i + 1] = chart_point(times_[slab + 1], positions_[slab + 1][c.vertices[i]]);
  }
  return VolumePatch(n_, std::span<const Point>(corners.data(), 2 * c.vertices.size()));
}

// ---------------------------------------------------------------------------------------------

FoliatedMesh build_mesh_1d(int num_cells, double cfl_fraction, double T,
                           std::shared_ptr<const FluxField> flux, const MotionFn& motion,
                           const MeshOptions& options) {
  if (num_cells < 3) throw MeshError("build_mesh_1d: num_cells must be at least 3");
  if (!(cfl_fraction > 0.0 && cfl_fraction < 1.0)) {
    throw MeshError("build_mesh_1d: cfl_fraction must lie in (0, 1)");
  }
  if (!(T > 0.0)) throw MeshError("build_mesh_1d: T must be positive");
  if (!flux || flux->dimension() != 1) throw MeshError("build_mesh_1d: flux must be 1D");
  FoliatedMesh m = MeshBuilder::topology_1d(num_cells, std::move(flux), options.quadrature_points);
  return MeshBuilder::finish(std::move(m), cfl_fraction, T, motion, options);
}

FoliatedMesh build_mesh_2d_torus(int nx, int ny, double cfl_fraction, double T,
                                 std::shared_ptr<const FluxField> flux,
                                 const MeshOptions& options) {
  if (nx < 3 || ny < 3) throw MeshError("build_mesh_2d_torus: nx and ny must be at least 3");
  if (!(cfl_fraction > 0.0 && cfl_fraction < 1.0)) {
    throw MeshError("build_mesh_2d_torus: cfl_fraction must lie in (0, 1)");
  }
  if (!(T > 0.0)) throw MeshError("build_mesh_2d_torus: T must be positive");
  if (!flux || flux->dimension() != 2) throw MeshError("build_mesh_2d_torus: flux must be 2D");
  FoliatedMesh m = MeshBuilder::topology_2d(nx, ny, std::move(flux), options.quadrature_points);
  return MeshBuilder::finish(std::move(m), cfl_fraction, T, {}, options);
}

// ---------------------------------------------------------------------------------------------

namespace {

void add(MeshValidationReport& r, std::string kind, int slab, int element, std::string detail) {
  r.violations.push_back({std::move(kind), slab, element, std::move(detail)});
}

// 1D: sorted intervals (shifted into [0,1)) must abut and cover length 1.
void check_tiling_1d(const FoliatedMesh& m, int slice, MeshValidationReport& r) {
  struct Iv {
    double a, b;
    int k;
  };
  std::vector<Iv> ivs;
  for (int k = 0; k < m.num_cells(); ++k) {
    double a = m.vertex(slice, m.cell(k).vertices[0])[0];
    double b = m.vertex(slice, m.cell(k).vertices[1])[0];
    const double shift = std::floor(a);
    ivs.push_back({a - shift, b - shift, k});
    if (!(b > a)) add(r, "tiling", slice, k, "empty or inverted interval");
  }
  std::sort(ivs.begin(), ivs.end(), [](const Iv& x, const Iv& y) { return x.a < y.a; });
  constexpr double tol = 1e-12;
  for (std::size_t i = 0; i + 1 < ivs.size(); ++i) {
    const double gap = ivs[i + 1].a - ivs[i].b;
    if (std::abs(gap) > tol) {
      add(r, "tiling", slice, ivs[i].k,
          gap > 0 ? "gap of " + fmt17(gap) + " after interval" : "overlap of " + fmt17(-gap));
    }
  }
  const double wrap = ivs.front().a + 1.0 - ivs.back().b;
  if (std::abs(wrap) > tol) add(r, "tiling", slice, ivs.back().k, "seam mismatch " + fmt17(wrap));
}

// 2D: rectangles on the elementary grid spanned by all edges; each elementary cell covered once.
void check_tiling_2d(const FoliatedMesh& m, int slice, MeshValidationReport& r) {
  struct Rect {
    double x0, x1, y0, y1;
  };
  std::vector<Rect> rects;
  std::vector<double> xs, ys;
  for (int k = 0; k < m.num_cells(); ++k) {
    const auto& v = m.cell(k).vertices;
    const SpacePoint& p0 = m.vertex(slice, v[0]);
    const SpacePoint& p3 = m.vertex(slice, v[3]);
    Rect q{p0[0] - std::floor(p0[0]), p3[0] - std::floor(p0[0]), p0[1] - std::floor(p0[1]),
           p3[1] - std::floor(p0[1])};
    if (!(q.x1 > q.x0 && q.y1 > q.y0)) add(r, "tiling", slice, k, "degenerate rectangle");
    rects.push_back(q);
    xs.insert(xs.end(), {q.x0, std::min(q.x1, 1.0)});
    ys.insert(ys.end(), {q.y0, std::min(q.y1, 1.0)});
  }
  xs.push_back(0.0);
  xs.push_back(1.0);
  ys.push_back(0.0);
  ys.push_back(1.0);
  auto uniq = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            v.end());
  };
  uniq(xs);
  uniq(ys);
  const std::size_t nx = xs.size() - 1;
  const std::size_t ny = ys.size() - 1;
  std::vector<int> cover(nx * ny, 0);
  auto index_of = [](const std::vector<double>& v, double x) {
    auto it = std::lower_bound(v.begin(), v.end(), x - 1e-12);
    return static_cast<std::size_t>(it - v.begin());
  };
  for (std::size_t k = 0; k < rects.size(); ++k) {
    const Rect& q = rects[k];
    if (q.x1 > 1.0 + 1e-12 || q.y1 > 1.0 + 1e-12) {
      add(r, "tiling", slice, static_cast<int>(k), "rectangle crosses the chart seam");
      continue;
    }
    for (std::size_t i = index_of(xs, q.x0); i < index_of(xs, q.x1); ++i) {
      for (std::size_t j = index_of(ys, q.y0); j < index_of(ys, q.y1); ++j) ++cover[j * nx + i];
    }
  }
  for (std::size_t c = 0; c < cover.size(); ++c) {
    if (cover[c] != 1) {
      add(r, "tiling", slice, -1,
          "elementary region (" + std::to_string(c % nx) + ", " + std::to_string(c / nx) +
              ") covered " + std::to_string(cover[c]) + " times");
    }
  }
}

}  // namespace

MeshValidationReport validate_mesh(const FoliatedMesh& mesh) {
  MeshValidationReport r;
  const FluxField& flux = mesh.flux();
  const QuadratureRule& quad = mesh.quadrature();

  // Topology and adjacency.
  std::vector<int> seen(mesh.num_faces(), 0);
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const Cell& c = mesh.cell(k);
    if (c.vertices.size() != (std::size_t{1} << mesh.space_dim())) {
      add(r, "topology", -1, k, "wrong corner count");
    }
    const int nk = static_cast<int>(c.faces.size());
    if (nk < 2 || nk > kMaxFacesPerCell) {
      add(r, "topology", -1, k, "N_K = " + std::to_string(nk) + " outside [2, 64]");
    }
    for (const FaceRef& ref : c.faces) {
      if (ref.face < 0 || ref.face >= mesh.num_faces()) {
        add(r, "adjacency", -1, k, "face id " + std::to_string(ref.face) + " out of range");
        continue;
      }
      ++seen[ref.face];
      const VerticalFace& f = mesh.face(ref.face);
      const int other = (f.cells[0] == k) ? f.cells[1] : (f.cells[1] == k ? f.cells[0] : -2);
      if (other == -2) {
        add(r, "adjacency", -1, k, "face " + std::to_string(ref.face) + " does not list the element");
        continue;
      }
      if (ref.neighbor != other) {
        add(r, "adjacency", -1, k,
            "face " + std::to_string(ref.face) + " neighbor id " + std::to_string(ref.neighbor) +
                " but the face is shared with " + std::to_string(other));
        continue;
      }
      if (ref.sign != 1 && ref.sign != -1) {
        add(r, "orientation", -1, k, "sign must be +1 or -1");
        continue;
      }
      if (other < 0 || other >= mesh.num_cells()) continue;
      const auto& nf = mesh.cell(other).faces;
      const auto back = std::find_if(nf.begin(), nf.end(), [&](const FaceRef& x) {
        return x.face == ref.face && x.neighbor == k;
      });
      if (back == nf.end()) {
        add(r, "adjacency", -1, k, "neighbor " + std::to_string(other) + " lacks the back reference");
      } else if (back->sign + ref.sign != 0) {
        add(r, "orientation", -1, k,
            "face " + std::to_string(ref.face) + " has equal signs on both sides");
      }
    }
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (seen[f] != 2) {
      add(r, "adjacency", -1, -1,
          "face " + std::to_string(f) + " referenced " + std::to_string(seen[f]) + " times");
    }
  }
  if (!r.violations.empty()) return r;

  // Tiling per slice and slab-to-slab matching.
  for (int i = 0; i <= mesh.num_slabs(); ++i) {
    if (mesh.space_dim() == 1) {
      check_tiling_1d(mesh, i, r);
    } else {
      check_tiling_2d(mesh, i, r);
    }
  }
  for (int s = 0; s + 1 < mesh.num_slabs(); ++s) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const int nk = mesh.next_cell(s, k);
      if (nk < 0 || nk >= mesh.num_cells()) {
        add(r, "tiling", s, k, "missing successor");
        continue;
      }
      const auto a = mesh.upper_face(s, k).corners();
      const auto b = mesh.lower_face(s + 1, nk).corners();
      if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
        add(r, "tiling", s, k, "upper face differs from the successor's lower face");
      }
    }
  }

  // Measures, diameters and slab ratio.
  double h = 0.0;
  for (int i = 0; i <= mesh.num_slabs(); ++i) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const FacePatch p = mesh.slice_face(i, k);
      h = std::max(h, p.spatial_diameter());
      double measure = 0.0;
      try {
        measure = face_measure(flux, p, quad);
      } catch (const DegenerateFaceError& e) {
        add(r, "measure", i, k, e.what());
        continue;
      }
      if (std::abs(measure - mesh.slice_measure(i, k)) > 1e-14 * (1.0 + measure)) {
        add(r, "measure", i, k, "cached |e| differs from recomputed value");
      }
    }
  }
  r.recomputed_h = h;
  if (h != mesh.h()) add(r, "diameter", -1, -1, "h " + fmt17(mesh.h()) + " vs " + fmt17(h));
  if (mesh.tau_max() / mesh.tau_min() > mesh.tau_ratio_bound()) {
    add(r, "ratio", -1, -1, "tau_max / tau_min exceeds " + fmt17(mesh.tau_ratio_bound()));
  }

  // Constant-state Stokes identity on every element.
  if (flux.geometry_compatible()) {
    const StateRange& ur = flux.u_range();
    for (int s = 0; s < mesh.num_slabs(); ++s) {
      std::vector<FaceQuadrature> vq;
      vq.reserve(mesh.num_faces());
      for (int f = 0; f < mesh.num_faces(); ++f) vq.emplace_back(mesh.vertical_face(s, f), quad);
      for (int k = 0; k < mesh.num_cells(); ++k) {
        const FaceQuadrature lo(mesh.lower_face(s, k), quad);
        const FaceQuadrature up(mesh.upper_face(s, k), quad);
        const double ep = mesh.e_plus(s, k);
        double worst = 0.0;
        for (int q = 0; q < 5; ++q) {
          const double u = ur.lo + ur.width() * q / 4.0;
          double res = up.flux(flux, u) - lo.flux(flux, u);
          for (const FaceRef& ref : mesh.cell(k).faces) res += ref.sign * vq[ref.face].flux(flux, u);
          worst = std::max(worst, std::abs(res));
        }
        r.max_stokes_residual = std::max(r.max_stokes_residual, worst / ep);
        if (worst > 1e-10 * ep) {
          add(r, "stokes", s, k, "constant-state boundary residual " + fmt17(worst));
        }
      }
    }
  }
  return r;
}

double compute_cfl_margin(const FoliatedMesh& mesh, int slab, int k) {
  const FluxField& flux = mesh.flux();
  const FaceQuadrature up(mesh.upper_face(slab, k), mesh.quadrature());
  const double ep = face_measure(flux, up);
  double mx = 0.0;
  for (const FaceRef& ref : mesh.cell(k).faces) {
    mx = std::max(mx, sup_abs_dphi(flux, FaceQuadrature(mesh.vertical_face(slab, ref.face),
                                                        mesh.quadrature())));
  }
  const double c = inf_dphi(flux, up, ep);
  if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
  return mesh.cell(k).faces.size() * mx / (ep * c);
}

HyperbolicityReport validate_hyperbolicity(const FoliatedMesh& mesh, const FluxField& flux) {
  HyperbolicityReport rep;
  rep.c_lower = std::numeric_limits<double>::infinity();
  rep.c_upper = -std::numeric_limits<double>::infinity();
  const StateRange& ur = flux.u_range();
  const double du = ur.width() / (kStateSamples - 1);
  for (int i = 0; i <= mesh.num_slabs(); ++i) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const FaceQuadrature fq(mesh.slice_face(i, k), mesh.quadrature());
      const double measure = fq.flux_du(flux, 0.0);
      if (!(measure > 0.0)) {
        rep.c_lower = std::min(rep.c_lower, 0.0);
        continue;
      }
      double prev = fq.flux(flux, ur.lo) / measure;
      for (int q = 1; q < kStateSamples; ++q) {
        const double cur = fq.flux(flux, state_sample(ur, q)) / measure;
        const double slope = (cur - prev) / du;
        rep.c_lower = std::min(rep.c_lower, slope);
        rep.c_upper = std::max(rep.c_upper, slope);
        prev = cur;
      }
    }
  }
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const double m = compute_cfl_margin(mesh, s, k);
      if (!(m <= rep.max_cfl_margin)) {
        rep.max_cfl_margin = m;
        rep.worst_slab = s;
        rep.worst_element = k;
      }
    }
  }
  rep.pass = rep.c_lower > 0.0 && rep.max_cfl_margin < 1.0;
  return rep;
}

std::vector<RefinementLevel> refinement_sequence(const RefinementConfig& config, int levels) {
  if (levels < 2) throw MeshError("refinement_sequence: levels must be at least 2");
  std::vector<RefinementLevel> out;
  int base_slabs = 0;
  for (int l = 0; l < levels; ++l) {
    const int cells = config.base_cells << l;
    MeshOptions opt = config.options;
    auto build = [&](const MeshOptions& o) {
      return config.dimension == 1
                 ? build_mesh_1d(cells, config.cfl_fraction, config.T, config.flux, config.motion, o)
                 : build_mesh_2d_torus(cells, cells, config.cfl_fraction, config.T, config.flux, o);
    };
    std::optional<FoliatedMesh> mesh;
    if (l == 0) {
      mesh = build(opt);
      base_slabs = mesh->num_slabs();
    } else {
      opt.num_slabs = base_slabs << l;
      try {
        mesh = build(opt);
      } catch (const CflError&) {
        // Motion makes the margin slightly super-linear in tau; fall back to the automatic count.
        MeshOptions automatic = config.options;
        automatic.num_slabs.reset();
        mesh = build(automatic);
      }
    }
    RefinementLevel lev{std::move(*mesh)};
    lev.cells = cells;
    lev.h = lev.mesh.h();
    lev.tau_max = lev.mesh.tau_max();
    lev.tau_min = lev.mesh.tau_min();
    lev.ratio_tau2_over_h = lev.tau_max * lev.tau_max / lev.h;
    lev.ratio_mixed_over_tau_min = (lev.tau_max * lev.tau_max + lev.h * lev.h) / lev.tau_min;
    out.push_back(std::move(lev));
  }
  return out;
}

void write_mesh_summary_csv(const FoliatedMesh& mesh, std::ostream& out) {
  out << "slab,element,e_minus,e_plus,n_k,cfl_margin\n";
  for (int s = 0; s < mesh.num_slabs(); ++s) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      out << s << ',' << k << ',' << fmt17(mesh.e_minus(s, k)) << ',' << fmt17(mesh.e_plus(s, k))
          << ',' << mesh.cell(k).faces.size() << ',' << fmt17(mesh.cfl_margin(s, k)) << '\n';
    }
  }
}

}  // namespace stfv
