#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <memory>
#include <string_view>
#include <vector>

#include "tvafem/image.hpp"
#include "tvafem/mesh.hpp"

namespace tvafem {

using MeshPtr = std::shared_ptr<const Mesh>;

/// Continuous P1 scalar function, one value per vertex.
struct FeScalar {
  MeshPtr mesh;
  Eigen::VectorXd values;

  FeScalar() = default;
  explicit FeScalar(MeshPtr m, double fill = 0.0);
  FeScalar(MeshPtr m, Eigen::VectorXd v);
};

/// Continuous P1 function with m components. Component k of vertex v is
/// stored at v * m + k.
struct FeVector {
  MeshPtr mesh;
  int m = 1;
  Eigen::VectorXd values;

  FeVector() = default;
  FeVector(MeshPtr mesh_, int components, double fill = 0.0);
  FeVector(MeshPtr mesh_, int components, Eigen::VectorXd v);

  [[nodiscard]] FeScalar component(int k) const;
};

/// Cellwise constant 2 x m matrix field. Entry (i, j) of cell c, i the spatial
/// direction and j the component, is stored at c * 2m + j * 2 + i.
struct FeCellMatrix {
  MeshPtr mesh;
  int m = 1;
  Eigen::VectorXd values;

  FeCellMatrix() = default;
  FeCellMatrix(MeshPtr mesh_, int components, double fill = 0.0);

  [[nodiscard]] int block() const { return 2 * m; }
  [[nodiscard]] double frobenius(int c) const;
};

/// Discontinuous P1 scalar, three corner values per cell stored at 3c + i.
struct DgScalar {
  MeshPtr mesh;
  Eigen::VectorXd values;

  DgScalar() = default;
  explicit DgScalar(MeshPtr m, double fill = 0.0);
};

/// Averaging rule on the Lagrange lattice of a cell.
struct Quadrature {
  std::vector<std::array<double, 3>> bary;
  double weight = 0.0;

  [[nodiscard]] int size() const { return static_cast<int>(bary.size()); }
};

/// Lattice of degree max(1, ceil(diam)) with equal weights summing to |K|.
Quadrature cell_quadrature(const Mesh& mesh, int c);
Quadrature lattice_quadrature(int degree, double area);
int lattice_degree(double diameter);
Point bary_to_point(const std::array<Point, 3>& corners, const std::array<double, 3>& bary);

double eval(const FeScalar& f, Point x);
std::vector<double> eval(const FeVector& f, Point x);

FeCellMatrix gradient(const FeScalar& f);
FeCellMatrix gradient(const FeVector& f);

/// Transfers a function to a mesh produced from its mesh by `bisect`.
FeScalar prolongate(const FeScalar& f, const MeshPtr& fine);
FeVector prolongate(const FeVector& f, const MeshPtr& fine);
FeCellMatrix prolongate(const FeCellMatrix& f, const MeshPtr& fine);
DgScalar prolongate(const DgScalar& f, const MeshPtr& fine);

/// Restriction of a P1 function to the DG1 space.
DgScalar to_dg(const FeScalar& f);

enum class InterpMethod { Nodal, L2Lagrange, QiLagrange, L2Pixel };

InterpMethod parse_interp_method(std::string_view name);
std::string_view to_string(InterpMethod method);

/// Weight of the per-vertex regularization in the pixel least-squares fit.
inline constexpr double kPixelFitRegularization = 1e-6;

FeScalar interpolate_image(const ImageGrid& img, const MeshPtr& mesh, InterpMethod method);

/// Containing cell and barycentric coordinates of every pixel center; cell is
/// -1 for pixels outside the mesh.
struct PixelSampling {
  int n1 = 0;
  int n2 = 0;
  std::vector<int> cell;
  std::vector<std::array<double, 3>> bary;
};

PixelSampling sample_pixels(const Mesh& mesh, int n1, int n2);

/// Sparse (pixels x vertices) evaluation matrix of P1 functions at pixels.
Eigen::SparseMatrix<double> pixel_evaluation_matrix(const Mesh& mesh, const PixelSampling& s);

/// Point evaluation at every pixel center, unclamped.
ImageGrid resample_to_image(const FeScalar& f, int n1, int n2);
ImageGrid resample_to_image(const FeScalar& f, const PixelSampling& s);

}  // namespace tvafem
