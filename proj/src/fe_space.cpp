#include "tvafem/fe_space.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tvafem {
namespace {

void require_mesh(const MeshPtr& m) {
  if (!m) throw std::invalid_argument("fe_space: null mesh");
}

void require_child(const Mesh& coarse, const Mesh& fine) {
  if (fine.parent_id() != coarse.id()) {
    throw std::invalid_argument("prolongate: fine mesh was not refined from this mesh");
  }
}

CellLocation locate_or_throw(const Mesh& mesh, Point x) {
  auto loc = mesh.locate(x);
  if (!loc) throw std::out_of_range("eval: point outside mesh domain");
  return *loc;
}

Eigen::VectorXd solve_spd(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-13);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * a.rows()));
  cg.compute(a);
  Eigen::VectorXd x = cg.solve(b);
  if (cg.info() != Eigen::Success) throw std::runtime_error("fe_space: conjugate gradient did not converge");
  return x;
}

}  // namespace

FeScalar::FeScalar(MeshPtr m, double fill) : mesh(std::move(m)) {
  require_mesh(mesh);
  values = Eigen::VectorXd::Constant(mesh->num_vertices(), fill);
}

FeScalar::FeScalar(MeshPtr m, Eigen::VectorXd v) : mesh(std::move(m)), values(std::move(v)) {
  require_mesh(mesh);
  if (values.size() != mesh->num_vertices()) throw std::invalid_argument("FeScalar: size mismatch");
}

FeVector::FeVector(MeshPtr mesh_, int components, double fill) : mesh(std::move(mesh_)), m(components) {
  require_mesh(mesh);
  if (m < 1) throw std::invalid_argument("FeVector: need at least one component");
  values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh->num_vertices()) * m, fill);
}

FeVector::FeVector(MeshPtr mesh_, int components, Eigen::VectorXd v)
    : mesh(std::move(mesh_)), m(components), values(std::move(v)) {
  require_mesh(mesh);
  if (m < 1 || values.size() != static_cast<Eigen::Index>(mesh->num_vertices()) * m) {
    throw std::invalid_argument("FeVector: size mismatch");
  }
}

FeScalar FeVector::component(int k) const {
  FeScalar s(mesh);
  for (int v = 0; v < mesh->num_vertices(); ++v) s.values[v] = values[v * m + k];
  return s;
}

FeCellMatrix::FeCellMatrix(MeshPtr mesh_, int components, double fill)
    : mesh(std::move(mesh_)), m(components) {
  require_mesh(mesh);
  values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh->num_cells()) * 2 * m, fill);
}

double FeCellMatrix::frobenius(int c) const { return values.segment(c * block(), block()).norm(); }

DgScalar::DgScalar(MeshPtr m, double fill) : mesh(std::move(m)) {
  require_mesh(mesh);
  values = Eigen::VectorXd::Constant(3 * static_cast<Eigen::Index>(mesh->num_cells()), fill);
}

int lattice_degree(double diameter) {
  return std::max(1, static_cast<int>(std::ceil(diameter - 1e-10)));
}

Quadrature lattice_quadrature(int degree, double area) {
  Quadrature q;
  q.bary.reserve(static_cast<std::size_t>(degree + 1) * (degree + 2) / 2);
  for (int j = 0; j <= degree; ++j) {
    for (int i = 0; i + j <= degree; ++i) {
      const double l1 = static_cast<double>(i) / degree;
      const double l2 = static_cast<double>(j) / degree;
      q.bary.push_back({1.0 - l1 - l2, l1, l2});
    }
  }
  q.weight = area / q.size();
  return q;
}

Quadrature cell_quadrature(const Mesh& mesh, int c) {
  return lattice_quadrature(lattice_degree(mesh.diameter(c)), mesh.area(c));
}

Point bary_to_point(const std::array<Point, 3>& p, const std::array<double, 3>& b) {
  return {b[0] * p[0].x + b[1] * p[1].x + b[2] * p[2].x, b[0] * p[0].y + b[1] * p[1].y + b[2] * p[2].y};
}

double eval(const FeScalar& f, Point x) {
  const auto loc = locate_or_throw(*f.mesh, x);
  const Cell& c = f.mesh->cell(loc.cell);
  return loc.bary[0] * f.values[c.v[0]] + loc.bary[1] * f.values[c.v[1]] + loc.bary[2] * f.values[c.v[2]];
}

std::vector<double> eval(const FeVector& f, Point x) {
  const auto loc = locate_or_throw(*f.mesh, x);
  const Cell& c = f.mesh->cell(loc.cell);
  std::vector<double> out(f.m, 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < f.m; ++k) out[k] += loc.bary[i] * f.values[c.v[i] * f.m + k];
  }
  return out;
}

FeCellMatrix gradient(const FeVector& f) {
  const Mesh& mesh = *f.mesh;
  FeCellMatrix g(f.mesh, f.m);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto grads = mesh.basis_gradients(c);
    const Cell& cell = mesh.cell(c);
    for (int k = 0; k < f.m; ++k) {
      double gx = 0.0, gy = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double v = f.values[cell.v[i] * f.m + k];
        gx += v * grads[i].x;
        gy += v * grads[i].y;
      }
      g.values[c * 2 * f.m + 2 * k] = gx;
      g.values[c * 2 * f.m + 2 * k + 1] = gy;
    }
  }
  return g;
}

FeCellMatrix gradient(const FeScalar& f) { return gradient(FeVector(f.mesh, 1, f.values)); }

FeVector prolongate(const FeVector& f, const MeshPtr& fine) {
  require_mesh(fine);
  require_child(*f.mesh, *fine);
  FeVector out(fine, f.m);
  const int nold = fine->num_parent_vertices();
  out.values.head(static_cast<Eigen::Index>(nold) * f.m) = f.values;
  const auto& parents = fine->new_vertex_parents();
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const int v = nold + static_cast<int>(k);
    for (int j = 0; j < f.m; ++j) {
      out.values[v * f.m + j] = 0.5 * (out.values[parents[k][0] * f.m + j] + out.values[parents[k][1] * f.m + j]);
    }
  }
  return out;
}

FeScalar prolongate(const FeScalar& f, const MeshPtr& fine) {
  return prolongate(FeVector(f.mesh, 1, f.values), fine).component(0);
}

FeCellMatrix prolongate(const FeCellMatrix& f, const MeshPtr& fine) {
  require_mesh(fine);
  require_child(*f.mesh, *fine);
  FeCellMatrix out(fine, f.m);
  const int b = f.block();
  for (int c = 0; c < fine->num_cells(); ++c) {
    out.values.segment(c * b, b) = f.values.segment(fine->parent_cells()[c] * b, b);
  }
  return out;
}

DgScalar prolongate(const DgScalar& f, const MeshPtr& fine) {
  require_mesh(fine);
  require_child(*f.mesh, *fine);
  DgScalar out(fine);
  for (int c = 0; c < fine->num_cells(); ++c) {
    const int parent = fine->parent_cells()[c];
    for (int i = 0; i < 3; ++i) {
      const auto l = f.mesh->barycentric(parent, fine->vertex(fine->cell(c).v[i]));
      out.values[3 * c + i] =
          l[0] * f.values[3 * parent] + l[1] * f.values[3 * parent + 1] + l[2] * f.values[3 * parent + 2];
    }
  }
  return out;
}

DgScalar to_dg(const FeScalar& f) {
  DgScalar out(f.mesh);
  for (int c = 0; c < f.mesh->num_cells(); ++c) {
    for (int i = 0; i < 3; ++i) out.values[3 * c + i] = f.values[f.mesh->cell(c).v[i]];
  }
  return out;
}

InterpMethod parse_interp_method(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "nodal") return InterpMethod::Nodal;
  if (s == "l2_lagrange") return InterpMethod::L2Lagrange;
  if (s == "qi_lagrange") return InterpMethod::QiLagrange;
  if (s == "l2_pixel") return InterpMethod::L2Pixel;
  throw std::invalid_argument("unknown interpolation method: " + std::string(name));
}

std::string_view to_string(InterpMethod method) {
  switch (method) {
    case InterpMethod::Nodal: return "nodal";
    case InterpMethod::L2Lagrange: return "l2_lagrange";
    case InterpMethod::QiLagrange: return "qi_lagrange";
    case InterpMethod::L2Pixel: return "l2_pixel";
  }
  return "?";
}

PixelSampling sample_pixels(const Mesh& mesh, int n1, int n2) {
  PixelSampling s;
  s.n1 = n1;
  s.n2 = n2;
  const std::size_t n = static_cast<std::size_t>(n1) * n2;
  s.cell.assign(n, -1);
  s.bary.assign(n, {0.0, 0.0, 0.0});
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      const auto loc = mesh.locate({i + 1.0, j + 1.0});
      if (!loc) continue;
      const std::size_t k = static_cast<std::size_t>(j) * n1 + i;
      s.cell[k] = loc->cell;
      s.bary[k] = loc->bary;
    }
  }
  return s;
}

Eigen::SparseMatrix<double> pixel_evaluation_matrix(const Mesh& mesh, const PixelSampling& s) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(s.cell.size() * 3);
  for (std::size_t k = 0; k < s.cell.size(); ++k) {
    if (s.cell[k] < 0) continue;
    const Cell& c = mesh.cell(s.cell[k]);
    for (int i = 0; i < 3; ++i) {
      if (s.bary[k][i] != 0.0) t.emplace_back(static_cast<int>(k), c.v[i], s.bary[k][i]);
    }
  }
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(s.cell.size()), mesh.num_vertices());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

namespace {

Eigen::VectorXd nodal_values(const ImageGrid& img, const Mesh& mesh) {
  Eigen::VectorXd g(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) g[v] = sample_bilinear(img, mesh.vertex(v));
  return g;
}

Eigen::VectorXd l2_lagrange(const ImageGrid& img, const Mesh& mesh) {
  const int nv = mesh.num_vertices();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(mesh.num_cells()) * 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto q = cell_quadrature(mesh, c);
    const auto corners = mesh.cell_points(c);
    const Cell& cell = mesh.cell(c);
    double m[3][3] = {};
    for (const auto& b : q.bary) {
      const double gv = sample_bilinear(img, bary_to_point(corners, b));
      for (int i = 0; i < 3; ++i) {
        rhs[cell.v[i]] += q.weight * gv * b[i];
        for (int j = 0; j < 3; ++j) m[i][j] += q.weight * b[i] * b[j];
      }
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.emplace_back(cell.v[i], cell.v[j], m[i][j]);
  }
  Eigen::SparseMatrix<double> mass(nv, nv);
  mass.setFromTriplets(t.begin(), t.end());
  return solve_spd(mass, rhs);
}

Eigen::VectorXd qi_lagrange(const ImageGrid& img, const Mesh& mesh) {
  const int nv = mesh.num_vertices();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(nv);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto q = cell_quadrature(mesh, c);
    const auto corners = mesh.cell_points(c);
    const Cell& cell = mesh.cell(c);
    // Dual basis with respect to the cell's own quadrature; under exact
    // integration it is 12 * lambda_i - 3.
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    Eigen::Vector3d moments = Eigen::Vector3d::Zero();
    for (const auto& b : q.bary) {
      const double gv = sample_bilinear(img, bary_to_point(corners, b));
      for (int i = 0; i < 3; ++i) {
        moments[i] += q.weight * gv * b[i];
        for (int j = 0; j < 3; ++j) gram(i, j) += q.weight * b[i] * b[j];
      }
    }
    const Eigen::Vector3d dofs = gram.ldlt().solve(moments);
    for (int i = 0; i < 3; ++i) {
      sum[cell.v[i]] += dofs[i];
      count[cell.v[i]] += 1.0;
    }
  }
  return sum.cwiseQuotient(count);
}

Eigen::VectorXd l2_pixel(const ImageGrid& img, const Mesh& mesh) {
  const auto s = sample_pixels(mesh, img.n1, img.n2);
  const auto a = pixel_evaluation_matrix(mesh, s);
  const Eigen::Map<const Eigen::VectorXd> px(img.values.data(), static_cast<Eigen::Index>(img.size()));
  const double eps2 = 2.0 * kPixelFitRegularization;
  Eigen::SparseMatrix<double> normal = a.transpose() * a;
  Eigen::SparseMatrix<double> id(mesh.num_vertices(), mesh.num_vertices());
  id.setIdentity();
  normal += eps2 * id;
  const Eigen::VectorXd rhs = a.transpose() * px + eps2 * nodal_values(img, mesh);
  return solve_spd(normal, rhs);
}

}  // namespace

FeScalar interpolate_image(const ImageGrid& img, const MeshPtr& mesh, InterpMethod method) {
  require_mesh(mesh);
  switch (method) {
    case InterpMethod::Nodal: return {mesh, nodal_values(img, *mesh)};
    case InterpMethod::L2Lagrange: return {mesh, l2_lagrange(img, *mesh)};
    case InterpMethod::QiLagrange: return {mesh, qi_lagrange(img, *mesh)};
    case InterpMethod::L2Pixel: return {mesh, l2_pixel(img, *mesh)};
  }
  throw std::invalid_argument("interpolate_image: bad method");
}

ImageGrid resample_to_image(const FeScalar& f, const PixelSampling& s) {
  ImageGrid out(s.n1, s.n2);
  for (std::size_t k = 0; k < s.cell.size(); ++k) {
    if (s.cell[k] < 0) throw std::out_of_range("resample: pixel outside mesh domain");
    const Cell& c = f.mesh->cell(s.cell[k]);
    out.values[k] = s.bary[k][0] * f.values[c.v[0]] + s.bary[k][1] * f.values[c.v[1]] +
                    s.bary[k][2] * f.values[c.v[2]];
  }
  return out;
}

ImageGrid resample_to_image(const FeScalar& f, int n1, int n2) {
  return resample_to_image(f, sample_pixels(*f.mesh, n1, n2));
}

}  // namespace tvafem
