#include "tvafem/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace tvafem {
namespace {

std::atomic<std::uint64_t> next_mesh_id{1};

double cross(Point a, Point b, Point c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

double dist(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

int longest_edge(const std::array<Point, 3>& p) {
  int best = 0;
  double best_len = -1.0;
  for (int i = 0; i < 3; ++i) {
    const double len = dist(p[(i + 1) % 3], p[(i + 2) % 3]);
    if (len > best_len + 1e-12) {
      best_len = len;
      best = i;
    }
  }
  return best;
}

}  // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<Cell> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)) {
  for (const Point& p : vertices_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw std::invalid_argument("mesh: non-finite vertex coordinate");
    }
  }
  const int nv = num_vertices();
  for (Cell& c : cells_) {
    for (int i : c.v) {
      if (i < 0 || i >= nv) throw std::invalid_argument("mesh: cell vertex index out of range");
    }
    if (c.v[0] == c.v[1] || c.v[1] == c.v[2] || c.v[0] == c.v[2]) {
      throw std::invalid_argument("mesh: degenerate cell (repeated vertex)");
    }
    std::array<Point, 3> p{vertices_[c.v[0]], vertices_[c.v[1]], vertices_[c.v[2]]};
    const double a = cross(p[0], p[1], p[2]);
    if (std::abs(a) < 1e-14) throw std::invalid_argument("mesh: zero-area cell");
    if (a < 0) {
      std::swap(c.v[1], c.v[2]);
      if (c.refinement_edge == 1) {
        c.refinement_edge = 2;
      } else if (c.refinement_edge == 2) {
        c.refinement_edge = 1;
      }
      std::swap(p[1], p[2]);
    }
    if (c.refinement_edge < 0 || c.refinement_edge > 2) c.refinement_edge = longest_edge(p);
  }
  id_ = next_mesh_id++;
  finalize();
}

Mesh Mesh::rectangle(int nx, int ny, Point lo, Point hi, DiagonalSplit split) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("mesh: need at least 2 vertices per dimension");
  if (!(hi.x > lo.x) || !(hi.y > lo.y)) throw std::invalid_argument("mesh: empty box");
  std::vector<Point> verts;
  verts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      verts.push_back({lo.x + (hi.x - lo.x) * i / (nx - 1), lo.y + (hi.y - lo.y) * j / (ny - 1)});
    }
  }
  auto id = [nx](int i, int j) { return j * nx + i; };
  std::vector<Cell> cells;
  cells.reserve(2 * static_cast<std::size_t>(nx - 1) * (ny - 1));
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      const bool main_diag = split == DiagonalSplit::Uniform || (i + j) % 2 == 0;
      // Newest vertex is the one opposite the diagonal, so both halves of a
      // square share the diagonal as a compatible refinement edge.
      if (main_diag) {
        cells.push_back({{v00, v10, v11}, 1, 0});
        cells.push_back({{v00, v11, v01}, 2, 0});
      } else {
        cells.push_back({{v00, v10, v01}, 0, 0});
        cells.push_back({{v10, v11, v01}, 1, 0});
      }
    }
  }
  return Mesh(std::move(verts), std::move(cells));
}

void Mesh::finalize() {
  const int nc = num_cells();
  areas_.resize(nc);
  diameters_.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const auto p = cell_points(c);
    areas_[c] = 0.5 * cross(p[0], p[1], p[2]);
    diameters_[c] = std::max({dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])});
  }
  build_facets();
  build_locator();
}

void Mesh::build_facets() {
  const int nc = num_cells();
  facets_.clear();
  cell_facets_.assign(nc, {-1, -1, -1});
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(static_cast<std::size_t>(nc) * 2);
  for (int c = 0; c < nc; ++c) {
    const Cell& cell = cells_[c];
    for (int i = 0; i < 3; ++i) {
      const int a = cell.v[(i + 1) % 3];
      const int b = cell.v[(i + 2) % 3];
      auto [it, inserted] = index.try_emplace(edge_key(a, b), num_facets());
      if (inserted) {
        Facet f;
        f.v = {std::min(a, b), std::max(a, b)};
        f.cells = {c, -1};
        facets_.push_back(f);
      } else {
        Facet& f = facets_[it->second];
        if (f.cells[1] >= 0) throw std::invalid_argument("mesh: edge shared by more than two cells");
        f.cells[1] = c;
      }
      cell_facets_[c][i] = it->second;
    }
  }
  for (Facet& f : facets_) {
    const Point p0 = vertices_[f.v[0]];
    const Point p1 = vertices_[f.v[1]];
    f.length = dist(p0, p1);
    f.normal = {(p1.y - p0.y) / f.length, -(p1.x - p0.x) / f.length};
    if (!f.is_boundary()) {
      // cells[0] must lie on the side opposite to the normal.
      const Point q = barycenter(f.cells[0]);
      const double side = (q.x - p0.x) * f.normal.x + (q.y - p0.y) * f.normal.y;
      if (side > 0) std::swap(f.cells[0], f.cells[1]);
    }
  }
}

void Mesh::build_locator() {
  lo_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  hi_ = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (const Point& p : vertices_) {
    lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
    hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
  }
  const int nc = num_cells();
  if (nc == 0) return;
  const double w = std::max(hi_.x - lo_.x, 1e-12);
  const double h = std::max(hi_.y - lo_.y, 1e-12);
  const double side = std::sqrt(w * h / nc) * 1.5;
  grid_nx_ = std::clamp(static_cast<int>(w / side) + 1, 1, 4096);
  grid_ny_ = std::clamp(static_cast<int>(h / side) + 1, 1, 4096);
  grid_dx_ = w / grid_nx_;
  grid_dy_ = h / grid_ny_;

  auto bucket_range = [&](int c) {
    const auto p = cell_points(c);
    const double x0 = std::min({p[0].x, p[1].x, p[2].x}), x1 = std::max({p[0].x, p[1].x, p[2].x});
    const double y0 = std::min({p[0].y, p[1].y, p[2].y}), y1 = std::max({p[0].y, p[1].y, p[2].y});
    const double eps = 1e-9;
    return std::array<int, 4>{
        std::clamp(static_cast<int>(std::floor((x0 - eps - lo_.x) / grid_dx_)), 0, grid_nx_ - 1),
        std::clamp(static_cast<int>(std::floor((x1 + eps - lo_.x) / grid_dx_)), 0, grid_nx_ - 1),
        std::clamp(static_cast<int>(std::floor((y0 - eps - lo_.y) / grid_dy_)), 0, grid_ny_ - 1),
        std::clamp(static_cast<int>(std::floor((y1 + eps - lo_.y) / grid_dy_)), 0, grid_ny_ - 1)};
  };
  std::vector<int> counts(static_cast<std::size_t>(grid_nx_) * grid_ny_ + 1, 0);
  for (int c = 0; c < nc; ++c) {
    const auto r = bucket_range(c);
    for (int j = r[2]; j <= r[3]; ++j)
      for (int i = r[0]; i <= r[1]; ++i) ++counts[j * grid_nx_ + i + 1];
  }
  for (std::size_t k = 1; k < counts.size(); ++k) counts[k] += counts[k - 1];
  grid_start_ = counts;
  grid_cells_.assign(counts.back(), -1);
  for (int c = 0; c < nc; ++c) {
    const auto r = bucket_range(c);
    for (int j = r[2]; j <= r[3]; ++j)
      for (int i = r[0]; i <= r[1]; ++i) grid_cells_[counts[j * grid_nx_ + i]++] = c;
  }
}

std::array<Point, 3> Mesh::cell_points(int c) const {
  const Cell& cell = cells_[c];
  return {vertices_[cell.v[0]], vertices_[cell.v[1]], vertices_[cell.v[2]]};
}

Point Mesh::barycenter(int c) const {
  const auto p = cell_points(c);
  return {(p[0].x + p[1].x + p[2].x) / 3.0, (p[0].y + p[1].y + p[2].y) / 3.0};
}

std::array<Point, 3> Mesh::basis_gradients(int c) const {
  const auto p = cell_points(c);
  const double two_area = 2.0 * areas_[c];
  std::array<Point, 3> g;
  for (int i = 0; i < 3; ++i) {
    const Point& a = p[(i + 1) % 3];
    const Point& b = p[(i + 2) % 3];
    g[i] = {(a.y - b.y) / two_area, (b.x - a.x) / two_area};
  }
  return g;
}

std::array<double, 3> Mesh::barycentric(int c, Point q) const {
  const auto p = cell_points(c);
  const double two_area = 2.0 * areas_[c];
  const double l1 = cross(p[2], p[0], q) / two_area;
  const double l2 = cross(p[0], p[1], q) / two_area;
  return {1.0 - l1 - l2, l1, l2};
}

std::optional<CellLocation> Mesh::locate(Point p) const {
  if (cells_.empty()) return std::nullopt;
  const double tol = 1e-10;
  if (p.x < lo_.x - tol || p.x > hi_.x + tol || p.y < lo_.y - tol || p.y > hi_.y + tol) {
    return std::nullopt;
  }
  const int i = std::clamp(static_cast<int>(std::floor((p.x - lo_.x) / grid_dx_)), 0, grid_nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor((p.y - lo_.y) / grid_dy_)), 0, grid_ny_ - 1);
  const int b = j * grid_nx_ + i;
  CellLocation best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int k = grid_start_[b]; k < grid_start_[b + 1]; ++k) {
    const int c = grid_cells_[k];
    const auto l = barycentric(c, p);
    const double m = std::min({l[0], l[1], l[2]});
    if (m > best_min) {
      best_min = m;
      best = {c, l};
      if (m >= 0) break;
    }
  }
  if (best.cell < 0 || best_min < -tol) return std::nullopt;
  return best;
}

double Mesh::min_angle() const {
  double best = std::numbers::pi;
  for (int c = 0; c < num_cells(); ++c) {
    const auto p = cell_points(c);
    for (int i = 0; i < 3; ++i) {
      const Point a = p[i], b = p[(i + 1) % 3], d = p[(i + 2) % 3];
      const double ux = b.x - a.x, uy = b.y - a.y, vx = d.x - a.x, vy = d.y - a.y;
      const double cosv = (ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy));
      best = std::min(best, std::acos(std::clamp(cosv, -1.0, 1.0)));
    }
  }
  return best;
}

Mesh build_image_mesh(int n1, int n2, DiagonalSplit split) {
  return build_scaled_image_mesh(n1, n2, n1, n2, split);
}

Mesh build_scaled_image_mesh(int n1, int n2, int k1, int k2, DiagonalSplit split) {
  if (n1 < 2 || n2 < 2 || k1 < 2 || k2 < 2) {
    throw std::invalid_argument("mesh: image mesh needs at least 2 vertices per dimension");
  }
  return Mesh::rectangle(k1, k2, {1.0, 1.0}, {static_cast<double>(n1), static_cast<double>(n2)},
                         split);
}

Mesh bisect(const Mesh& mesh, std::span<const int> marked) {
  const int nv = mesh.num_vertices();
  const int nf = mesh.num_facets();
  std::vector<char> edge_marked(nf, 0);
  std::vector<int> queue;
  auto mark_edge = [&](int f) {
    if (!edge_marked[f]) {
      edge_marked[f] = 1;
      queue.push_back(f);
    }
  };
  for (int c : marked) {
    if (c < 0 || c >= mesh.num_cells()) throw std::out_of_range("bisect: cell index out of range");
    mark_edge(mesh.cell_facet(c, mesh.cell(c).refinement_edge));
  }
  // Closure: a cell with any marked edge must also bisect its refinement edge.
  while (!queue.empty()) {
    const int f = queue.back();
    queue.pop_back();
    for (int c : mesh.facets()[f].cells) {
      if (c < 0) continue;
      mark_edge(mesh.cell_facet(c, mesh.cell(c).refinement_edge));
    }
  }

  Mesh out;
  out.vertices_ = mesh.vertices();
  out.num_parent_vertices_ = nv;
  std::vector<int> midpoint(nf, -1);
  for (int f = 0; f < nf; ++f) {
    if (!edge_marked[f]) continue;
    const Facet& facet = mesh.facets()[f];
    const Point a = mesh.vertex(facet.v[0]);
    const Point b = mesh.vertex(facet.v[1]);
    midpoint[f] = static_cast<int>(out.vertices_.size());
    out.vertices_.push_back({0.5 * (a.x + b.x), 0.5 * (a.y + b.y)});
    out.new_vertex_parents_.push_back(facet.v);
  }

  std::unordered_map<std::uint64_t, int> facet_of;
  facet_of.reserve(static_cast<std::size_t>(nf) * 2);
  for (int f = 0; f < nf; ++f) {
    if (edge_marked[f]) facet_of.emplace(edge_key(mesh.facets()[f].v[0], mesh.facets()[f].v[1]), f);
  }
  auto marked_midpoint = [&](int a, int b) {
    if (a >= nv || b >= nv) return -1;
    auto it = facet_of.find(edge_key(a, b));
    return it == facet_of.end() ? -1 : midpoint[it->second];
  };

  out.cells_.reserve(mesh.num_cells() * 2);
  out.parent_cells_.reserve(mesh.num_cells() * 2);
  std::vector<Cell> stack;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    stack.push_back(mesh.cell(c));
    while (!stack.empty()) {
      const Cell cell = stack.back();
      stack.pop_back();
      const int r = cell.refinement_edge;
      const int apex = cell.v[r];
      const int b = cell.v[(r + 1) % 3];
      const int d = cell.v[(r + 2) % 3];
      const int m = marked_midpoint(b, d);
      if (m < 0) {
        out.cells_.push_back(cell);
        out.parent_cells_.push_back(c);
        continue;
      }
      // Push in reverse so the (apex, b, m) child is emitted first.
      stack.push_back({{apex, m, d}, 1, cell.generation + 1});
      stack.push_back({{apex, b, m}, 2, cell.generation + 1});
    }
  }
  out.id_ = next_mesh_id++;
  out.parent_id_ = mesh.id();
  out.finalize();
  return out;
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<int> all(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) all[c] = c;
  return bisect(mesh, all);
}

void write_off(const Mesh& mesh, std::ostream& out) {
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_cells() << ' ' << mesh.num_facets() << '\n';
  out.precision(17);
  for (const Point& p : mesh.vertices()) out << p.x << ' ' << p.y << " 0\n";
  for (const Cell& c : mesh.cells()) out << "3 " << c.v[0] << ' ' << c.v[1] << ' ' << c.v[2] << '\n';
}

void write_vtk(const Mesh& mesh, std::ostream& out, std::span<const double> cell_scalar,
               const std::string& scalar_name) {
  if (!cell_scalar.empty() && static_cast<int>(cell_scalar.size()) != mesh.num_cells()) {
    throw std::invalid_argument("write_vtk: cell scalar size does not match cell count");
  }
  out << "# vtk DataFile Version 3.0\ntvafem mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out.precision(17);
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Point& p : mesh.vertices()) out << p.x << ' ' << p.y << " 0\n";
  out << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
  for (const Cell& c : mesh.cells()) out << "3 " << c.v[0] << ' ' << c.v[1] << ' ' << c.v[2] << '\n';
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) out << "5\n";
  if (!cell_scalar.empty()) {
    out << "CELL_DATA " << mesh.num_cells() << "\nSCALARS " << scalar_name
        << " double 1\nLOOKUP_TABLE default\n";
    for (double v : cell_scalar) out << v << '\n';
  }
}

}  // namespace tvafem
