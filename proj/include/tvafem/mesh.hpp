#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tvafem {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Triangle with newest-vertex bisection metadata. `refinement_edge` is the
/// local index of the newest vertex; the edge opposite it is the one that gets
/// bisected next.
struct Cell {
  std::array<int, 3> v{};
  int refinement_edge = 0;
  int generation = 0;
};

/// Oriented edge. Endpoints are stored in ascending vertex order and `normal`
/// is the tangent rotated clockwise. For interior facets `cells[0]` is the cell
/// the normal points out of; boundary facets have `cells[1] == -1`.
struct Facet {
  std::array<int, 2> v{};
  std::array<int, 2> cells{-1, -1};
  Point normal;
  double length = 0.0;

  [[nodiscard]] bool is_boundary() const { return cells[1] < 0; }
};

/// How each grid square of a rectangular mesh is split into two triangles.
enum class DiagonalSplit {
  Alternating,  // criss-cross: diagonal direction flips with (i + j) parity
  Uniform,      // every square split along its lower-left/upper-right diagonal
};

/// Barycentric location of a point inside a cell.
struct CellLocation {
  int cell = -1;
  std::array<double, 3> bary{};
};

/// Conforming 2-D triangulation. Immutable once built; refinement produces a
/// new mesh that remembers which cell of its parent mesh each cell came from.
class Mesh {
 public:
  /// Builds a mesh from explicit cells. Cells are reoriented to positive area
  /// and, when `refinement_edge` is negative, get their longest edge assigned.
  Mesh(std::vector<Point> vertices, std::vector<Cell> cells);

  /// `nx` x `ny` vertices spanning the axis-aligned box [lo, hi].
  static Mesh rectangle(int nx, int ny, Point lo, Point hi,
                        DiagonalSplit split = DiagonalSplit::Alternating);

  [[nodiscard]] const std::vector<Point>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }
  [[nodiscard]] const std::vector<Facet>& facets() const { return facets_; }
  [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
  [[nodiscard]] int num_cells() const { return static_cast<int>(cells_.size()); }
  [[nodiscard]] int num_facets() const { return static_cast<int>(facets_.size()); }

  [[nodiscard]] const Point& vertex(int i) const { return vertices_[i]; }
  [[nodiscard]] const Cell& cell(int c) const { return cells_[c]; }
  [[nodiscard]] std::array<Point, 3> cell_points(int c) const;

  /// Facet index of the local edge opposite local vertex `i` of cell `c`.
  [[nodiscard]] int cell_facet(int c, int i) const { return cell_facets_[c][i]; }

  [[nodiscard]] double area(int c) const { return areas_[c]; }
  /// Longest edge length h_K.
  [[nodiscard]] double diameter(int c) const { return diameters_[c]; }
  [[nodiscard]] Point barycenter(int c) const;

  /// Gradients of the three barycentric coordinate functions on cell `c`.
  [[nodiscard]] std::array<Point, 3> basis_gradients(int c) const;

  [[nodiscard]] std::array<double, 3> barycentric(int c, Point p) const;
  /// Containing cell of `p`, with barycentric tolerance 1e-10.
  [[nodiscard]] std::optional<CellLocation> locate(Point p) const;

  /// Identity of this mesh and of the mesh it was refined from (0 = none).
  [[nodiscard]] std::uint64_t id() const { return id_; }
  [[nodiscard]] std::uint64_t parent_id() const { return parent_id_; }
  /// Cell of the parent mesh containing each cell. Empty for unrefined meshes.
  [[nodiscard]] const std::vector<int>& parent_cells() const { return parent_cells_; }
  /// Number of vertices inherited unchanged (same indices) from the parent.
  [[nodiscard]] int num_parent_vertices() const { return num_parent_vertices_; }
  /// Endpoints of the parent edge bisected to create each new vertex, indexed
  /// by `vertex - num_parent_vertices()`.
  [[nodiscard]] const std::vector<std::array<int, 2>>& new_vertex_parents() const {
    return new_vertex_parents_;
  }

  [[nodiscard]] double min_angle() const;
  [[nodiscard]] Point bounding_lo() const { return lo_; }
  [[nodiscard]] Point bounding_hi() const { return hi_; }

 private:
  friend Mesh bisect(const Mesh&, std::span<const int>);

  Mesh() = default;
  void finalize();
  void build_facets();
  void build_locator();

  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> cell_facets_;
  std::vector<double> areas_;
  std::vector<double> diameters_;

  std::uint64_t id_ = 0;
  std::uint64_t parent_id_ = 0;
  std::vector<int> parent_cells_;
  int num_parent_vertices_ = 0;
  std::vector<std::array<int, 2>> new_vertex_parents_;

  Point lo_, hi_;
  int grid_nx_ = 0, grid_ny_ = 0;
  double grid_dx_ = 1.0, grid_dy_ = 1.0;
  std::vector<int> grid_start_;
  std::vector<int> grid_cells_;
};

/// Image-aligned mesh with vertices at all integer points of [1,n1] x [1,n2].
Mesh build_image_mesh(int n1, int n2, DiagonalSplit split = DiagonalSplit::Alternating);

/// `k1` x `k2` vertices spanning the image domain [1,n1] x [1,n2].
Mesh build_scaled_image_mesh(int n1, int n2, int k1, int k2,
                             DiagonalSplit split = DiagonalSplit::Alternating);

/// Newest-vertex bisection of the marked cells plus the closure needed to
/// keep the mesh conforming. Returns an equal copy for an empty marking.
Mesh bisect(const Mesh& mesh, std::span<const int> marked);

/// One uniform sweep: every cell is bisected at least once.
Mesh refine_uniform(const Mesh& mesh);

void write_off(const Mesh& mesh, std::ostream& out);
void write_vtk(const Mesh& mesh, std::ostream& out, std::span<const double> cell_scalar = {},
               const std::string& scalar_name = "indicator");

}  // namespace tvafem
