#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "support.hpp"
#include "tvafem/fe_space.hpp"
#include "tvafem/synthetic.hpp"

using namespace tvafem;

namespace {

constexpr InterpMethod kMethods[] = {InterpMethod::Nodal, InterpMethod::L2Lagrange, InterpMethod::QiLagrange,
                                     InterpMethod::L2Pixel};

ImageGrid affine_image(int n1, int n2, double a, double b, double c) {
  ImageGrid img(n1, n2);
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) img(i, j) = a + b * (i + 1) + c * (j + 1);
  }
  return img;
}

double pixel_sse(const FeScalar& f, const ImageGrid& img) {
  const ImageGrid r = resample_to_image(f, img.n1, img.n2);
  double s = 0.0;
  for (std::size_t k = 0; k < img.size(); ++k) s += (r.values[k] - img.values[k]) * (r.values[k] - img.values[k]);
  return s;
}

MeshPtr single_triangle() {
  return testkit::share(Mesh({{1.0, 1.0}, {7.0, 1.5}, {2.5, 6.0}}, {Cell{{0, 1, 2}, 0, 0}}));
}

}  // namespace

TEST(FeEval, ConstantFunction) {
  std::mt19937 rng(1);
  const auto m = testkit::random_mesh(rng, 5, 4, 2);
  const FeScalar f(m, 0.7);
  std::uniform_real_distribution<double> x(1.0, 5.0), y(1.0, 4.0);
  for (int k = 0; k < 50; ++k) EXPECT_NEAR(eval(f, {x(rng), y(rng)}), 0.7, 1e-14);
}

TEST(FeEval, ReproducesCoordinate) {
  const auto m = testkit::share(build_image_mesh(4, 4));
  FeScalar f(m);
  for (int v = 0; v < m->num_vertices(); ++v) f.values[v] = m->vertex(v).x;
  EXPECT_NEAR(eval(f, {1.5, 2.0}), 1.5, 1e-14);
}

TEST(FeEval, BarycenterIsMeanOfCorners) {
  std::mt19937 rng(2);
  const auto m = testkit::random_mesh(rng, 6, 6, 2);
  const FeScalar f(m, testkit::random_vector(rng, m->num_vertices(), -1.0, 1.0));
  for (int c = 0; c < m->num_cells(); ++c) {
    const auto& v = m->cell(c).v;
    EXPECT_NEAR(eval(f, m->barycenter(c)), (f.values[v[0]] + f.values[v[1]] + f.values[v[2]]) / 3.0, 1e-13);
  }
}

TEST(FeEval, VectorComponents) {
  std::mt19937 rng(3);
  const auto m = testkit::random_mesh(rng, 4, 4, 1);
  const FeVector f(m, 2, testkit::random_vector(rng, 2 * m->num_vertices(), -1.0, 1.0));
  const Point p{2.3, 3.1};
  const auto v = eval(f, p);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0], eval(f.component(0), p), 1e-14);
  EXPECT_NEAR(v[1], eval(f.component(1), p), 1e-14);
}

TEST(FeEval, OutsideThrows) {
  const auto m = testkit::share(build_image_mesh(3, 3));
  EXPECT_THROW(eval(FeScalar(m), Point{0.0, 0.0}), std::out_of_range);
}

TEST(FeGradient, ConstantAndLinear) {
  std::mt19937 rng(4);
  const auto m = testkit::random_mesh(rng, 5, 5, 2);
  const auto g0 = gradient(FeScalar(m, 3.0));
  EXPECT_LT(g0.values.cwiseAbs().maxCoeff(), 1e-14);
  FeScalar x(m);
  for (int v = 0; v < m->num_vertices(); ++v) x.values[v] = m->vertex(v).x;
  const auto gx = gradient(x);
  for (int c = 0; c < m->num_cells(); ++c) {
    EXPECT_NEAR(gx.values[2 * c], 1.0, 1e-12);
    EXPECT_NEAR(gx.values[2 * c + 1], 0.0, 1e-12);
  }
}

TEST(FeGradient, MatchesFiniteDifferences) {
  std::mt19937 rng(5);
  const auto m = single_triangle();
  const FeVector f(m, 2, testkit::random_vector(rng, 6, -1.0, 1.0));
  const auto g = gradient(f);
  const Point c = m->barycenter(0);
  const double h = 1e-4;
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const Point e{i == 0 ? h : 0.0, i == 1 ? h : 0.0};
      const double fd = (eval(f, {c.x + e.x, c.y + e.y})[j] - eval(f, {c.x - e.x, c.y - e.y})[j]) / (2 * h);
      EXPECT_NEAR(g.values[j * 2 + i], fd, 1e-8);
    }
  }
}

TEST(FeProlongate, NestingPreservesValues) {
  std::mt19937 rng(6);
  const auto coarse = testkit::random_mesh(rng, 6, 5, 1);
  std::vector<int> marked;
  for (int c = 0; c < coarse->num_cells(); c += 3) marked.push_back(c);
  const auto fine = testkit::share(bisect(*coarse, marked));
  const FeScalar f(coarse, testkit::random_vector(rng, coarse->num_vertices(), -2.0, 2.0));
  const FeScalar pf = prolongate(f, fine);
  const FeVector fv(coarse, 2, testkit::random_vector(rng, 2 * coarse->num_vertices(), -2.0, 2.0));
  const FeVector pfv = prolongate(fv, fine);
  std::uniform_real_distribution<double> x(1.0, 6.0), y(1.0, 5.0);
  for (int k = 0; k < 100; ++k) {
    const Point p{x(rng), y(rng)};
    EXPECT_NEAR(eval(pf, p), eval(f, p), 1e-12);
    const auto a = eval(pfv, p), b = eval(fv, p);
    EXPECT_NEAR(a[0], b[0], 1e-12);
    EXPECT_NEAR(a[1], b[1], 1e-12);
  }
  const auto& parents = fine->new_vertex_parents();
  for (std::size_t k = 0; k < parents.size(); ++k) {
    const int v = fine->num_parent_vertices() + static_cast<int>(k);
    EXPECT_NEAR(pf.values[v], 0.5 * (f.values[parents[k][0]] + f.values[parents[k][1]]), 1e-14);
  }
}

TEST(FeProlongate, CellFieldsFollowParents) {
  std::mt19937 rng(7);
  const auto coarse = testkit::random_mesh(rng, 4, 4, 0);
  const auto fine = testkit::share(refine_uniform(*coarse));
  FeCellMatrix g(coarse, 1);
  g.values = testkit::random_vector(rng, 2 * coarse->num_cells(), -1.0, 1.0);
  const auto pg = prolongate(g, fine);
  const DgScalar d = testkit::random_dg(rng, coarse, -1.0, 1.0);
  const DgScalar pd = prolongate(d, fine);
  for (int c = 0; c < fine->num_cells(); ++c) {
    const int p = fine->parent_cells()[c];
    EXPECT_EQ(pg.values[2 * c], g.values[2 * p]);
    EXPECT_EQ(pg.values[2 * c + 1], g.values[2 * p + 1]);
    // DG values at the fine corners equal the parent's linear function there.
    for (int i = 0; i < 3; ++i) {
      const auto lam = coarse->barycentric(p, fine->vertex(fine->cell(c).v[i]));
      const double ref = lam[0] * d.values[3 * p] + lam[1] * d.values[3 * p + 1] + lam[2] * d.values[3 * p + 2];
      EXPECT_NEAR(pd.values[3 * c + i], ref, 1e-13);
    }
  }
}

TEST(FeProlongate, WrongMeshThrows) {
  const auto a = testkit::share(build_image_mesh(3, 3));
  const auto b = testkit::share(build_image_mesh(3, 3));
  EXPECT_THROW(prolongate(FeScalar(a), b), std::invalid_argument);
}

TEST(FeQuadrature, LatticeDegreeAndWeights) {
  EXPECT_EQ(lattice_degree(0.5), 1);
  EXPECT_EQ(lattice_degree(1.0), 1);
  EXPECT_EQ(lattice_degree(1.2), 2);
  EXPECT_EQ(lattice_degree(7.0), 7);
  for (int d = 1; d <= 9; ++d) {
    const auto q = lattice_quadrature(d, 2.5);
    EXPECT_EQ(q.size(), (d + 1) * (d + 2) / 2);
    EXPECT_NEAR(q.weight * q.size(), 2.5, 1e-14);
    for (const auto& b : q.bary) {
      EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-14);
      for (double l : b) EXPECT_GE(l, -1e-15);
    }
  }
  std::mt19937 rng(8);
  const auto m = testkit::random_mesh(rng, 9, 7, 2);
  for (int c = 0; c < m->num_cells(); ++c) {
    const auto q = cell_quadrature(*m, c);
    const int d = std::max(1, static_cast<int>(std::ceil(m->diameter(c) - 1e-12)));
    EXPECT_EQ(q.size(), (d + 1) * (d + 2) / 2);
    EXPECT_NEAR(q.weight * q.size(), m->area(c), 1e-12);
  }
}

TEST(FeInterpolate, ParseNames) {
  for (InterpMethod m : kMethods) EXPECT_EQ(parse_interp_method(to_string(m)), m);
  EXPECT_THROW(parse_interp_method("cubic"), std::invalid_argument);
}

TEST(FeInterpolate, ConstantImageAllMethods) {
  const ImageGrid img(20, 14, 0.3);
  const auto m = testkit::share(build_scaled_image_mesh(20, 14, 7, 5));
  for (InterpMethod method : kMethods) {
    const FeScalar f = interpolate_image(img, m, method);
    EXPECT_LT((f.values.array() - 0.3).abs().maxCoeff(), 1e-10) << to_string(method);
  }
}

TEST(FeInterpolate, AffineImageAllMethods) {
  const ImageGrid img = affine_image(24, 18, 0.1, 0.02, 0.015);
  std::mt19937 rng(10);
  for (const MeshPtr& m : {testkit::share(build_scaled_image_mesh(24, 18, 9, 6)),
                           testkit::share(build_scaled_image_mesh(24, 18, 4, 3)),
                           testkit::random_mesh(rng, 24, 18, 2)}) {
    for (InterpMethod method : kMethods) {
      const FeScalar f = interpolate_image(img, m, method);
      const ImageGrid r = resample_to_image(f, img.n1, img.n2);
      double err = 0.0;
      for (std::size_t k = 0; k < img.size(); ++k) err = std::max(err, std::abs(r.values[k] - img.values[k]));
      EXPECT_LT(err, 1e-10) << to_string(method);
    }
  }
}

TEST(FeInterpolate, NodalOnAlignedMeshIsExact) {
  const ImageGrid img = synthetic_image(32, 32);
  const auto m = testkit::share(build_image_mesh(32, 32));
  const FeScalar f = interpolate_image(img, m, InterpMethod::Nodal);
  EXPECT_LT(pixel_sse(f, img) / static_cast<double>(img.size()), 1e-20);
  EXPECT_TRUE(std::isinf(psnr(resample_to_image(f, 32, 32), img)));
}

TEST(FeInterpolate, PixelFitMinimizesPixelError) {
  const ImageGrid img = synthetic_image(32, 32);
  std::mt19937 rng(11);
  for (const MeshPtr& m : {testkit::share(build_scaled_image_mesh(32, 32, 16, 16)),
                           testkit::share(build_scaled_image_mesh(32, 32, 13, 13)),
                           testkit::random_mesh(rng, 32, 32, 1)}) {
    const double best = pixel_sse(interpolate_image(img, m, InterpMethod::L2Pixel), img);
    for (InterpMethod method : kMethods) {
      EXPECT_LE(best, pixel_sse(interpolate_image(img, m, method), img) + 1e-12) << to_string(method);
    }
  }
}

TEST(FeInterpolate, PixelFitMatchesDenseLeastSquares) {
  const ImageGrid img = synthetic_image(20, 16);
  const auto m = testkit::share(build_scaled_image_mesh(20, 16, 6, 5));
  const int nv = m->num_vertices();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(img.size()), nv);
  Eigen::VectorXd b(static_cast<Eigen::Index>(img.size()));
  for (int j = 0; j < img.n2; ++j) {
    for (int i = 0; i < img.n1; ++i) {
      const int k = j * img.n1 + i;
      const Point p{i + 1.0, j + 1.0};
      b[k] = img(i, j);
      for (int c = 0; c < m->num_cells(); ++c) {
        const auto lam = m->barycentric(c, p);
        if (std::min({lam[0], lam[1], lam[2]}) < -1e-12) continue;
        for (int q = 0; q < 3; ++q) a(k, m->cell(c).v[q]) = lam[q];
        break;
      }
    }
  }
  Eigen::VectorXd anchor(nv);
  for (int v = 0; v < nv; ++v) anchor[v] = sample_bilinear(img, m->vertex(v));
  // Stationarity of 1/2 |A x - b|^2 + eps |x - anchor|^2.
  const double eps2 = 2.0 * kPixelFitRegularization;
  const Eigen::MatrixXd normal = a.transpose() * a + eps2 * Eigen::MatrixXd::Identity(nv, nv);
  const Eigen::VectorXd x = normal.ldlt().solve(a.transpose() * b + eps2 * anchor);
  const FeScalar f = interpolate_image(img, m, InterpMethod::L2Pixel);
  EXPECT_LT((f.values - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FeInterpolate, PixelFitHandlesEmptySupport) {
  // Mesh finer than the pixel grid: most vertices see no pixel center.
  const ImageGrid img = synthetic_image(6, 6);
  const auto m = testkit::share(refine_uniform(refine_uniform(build_image_mesh(6, 6))));
  const FeScalar f = interpolate_image(img, m, InterpMethod::L2Pixel);
  EXPECT_TRUE(f.values.allFinite());
  EXPECT_LT(pixel_sse(f, img), 1e-8);
}

TEST(FeInterpolate, LagrangeProjectionIsOrthogonal) {
  const ImageGrid img = synthetic_image(30, 22);
  std::mt19937 rng(12);
  const auto m = testkit::random_mesh(rng, 30, 22, 2);
  const FeScalar f = interpolate_image(img, m, InterpMethod::L2Lagrange);
  Eigen::VectorXd residual = Eigen::VectorXd::Zero(m->num_vertices());
  for (int c = 0; c < m->num_cells(); ++c) {
    const auto q = cell_quadrature(*m, c);
    const auto corners = m->cell_points(c);
    const auto& v = m->cell(c).v;
    for (const auto& b : q.bary) {
      const double gh = b[0] * f.values[v[0]] + b[1] * f.values[v[1]] + b[2] * f.values[v[2]];
      const double e = sample_bilinear(img, bary_to_point(corners, b)) - gh;
      for (int i = 0; i < 3; ++i) residual[v[i]] += q.weight * e * b[i];
    }
  }
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FeInterpolate, QuasiInterpolantOnOneCellIsLocalProjection) {
  const ImageGrid img = synthetic_image(10, 10);
  const auto m = single_triangle();
  const FeScalar qi = interpolate_image(img, m, InterpMethod::QiLagrange);
  const FeScalar l2 = interpolate_image(img, m, InterpMethod::L2Lagrange);
  EXPECT_LT((qi.values - l2.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FeInterpolate, QuasiInterpolantAveragesLocalDofs) {
  // Small cells use the vertex lattice, where every local DOF is the nodal value.
  const ImageGrid img = synthetic_image(16, 16);
  const auto m = testkit::share(refine_uniform(build_image_mesh(16, 16)));
  const FeScalar qi = interpolate_image(img, m, InterpMethod::QiLagrange);
  const FeScalar nodal = interpolate_image(img, m, InterpMethod::Nodal);
  EXPECT_LT((qi.values - nodal.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FeResample, ConstantAndNodalRoundTrip) {
  const auto m = testkit::share(build_scaled_image_mesh(12, 9, 5, 4));
  const ImageGrid r = resample_to_image(FeScalar(m, 0.5), 12, 9);
  for (double v : r.values) EXPECT_NEAR(v, 0.5, 1e-14);

  const ImageGrid img = synthetic_image(12, 9);
  const auto aligned = testkit::share(build_image_mesh(12, 9));
  const ImageGrid back = resample_to_image(interpolate_image(img, aligned, InterpMethod::Nodal), 12, 9);
  for (std::size_t k = 0; k < img.size(); ++k) EXPECT_NEAR(back.values[k], img.values[k], 1e-14);
}

TEST(FeResample, HalfResolutionProjectionHasFinitePsnr) {
  const ImageGrid img = synthetic_image(32, 32);
  const auto m = testkit::share(build_scaled_image_mesh(32, 32, 16, 16));
  const double p = psnr(resample_to_image(interpolate_image(img, m, InterpMethod::L2Lagrange), 32, 32), img);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_GT(p, 0.0);
}

TEST(FeResample, IsUnclamped) {
  const auto m = testkit::share(build_image_mesh(4, 4));
  const ImageGrid r = resample_to_image(FeScalar(m, 1.5), 4, 4);
  EXPECT_NEAR(r.values[0], 1.5, 1e-14);
}

TEST(FeResample, EvaluationMatrixMatchesEval) {
  std::mt19937 rng(13);
  const auto m = testkit::random_mesh(rng, 10, 8, 2);
  const FeScalar f(m, testkit::random_vector(rng, m->num_vertices(), 0.0, 1.0));
  const auto s = sample_pixels(*m, 10, 8);
  const Eigen::VectorXd px = pixel_evaluation_matrix(*m, s) * f.values;
  for (int j = 0; j < 8; ++j) {
    for (int i = 0; i < 10; ++i) EXPECT_NEAR(px[j * 10 + i], eval(f, {i + 1.0, j + 1.0}), 1e-13);
  }
}
