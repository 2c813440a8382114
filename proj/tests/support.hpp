// Shared helpers for the tests: random instances and dense-loop oracles that
// recompute the discrete quantities without the library's assembly code.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "tvafem/adapt.hpp"
#include "tvafem/apps.hpp"
#include "tvafem/model.hpp"
#include "tvafem/solver.hpp"

namespace tvafem::testkit {

inline MeshPtr share(Mesh m) { return std::make_shared<const Mesh>(std::move(m)); }

/// Rectangle mesh of nx x ny vertices over [1, nx] x [1, ny], optionally with a
/// few random local bisections.
inline MeshPtr random_mesh(std::mt19937& rng, int nx, int ny, int local_sweeps) {
  Mesh m = Mesh::rectangle(nx, ny, {1.0, 1.0}, {static_cast<double>(nx), static_cast<double>(ny)});
  for (int s = 0; s < local_sweeps; ++s) {
    std::vector<int> marked;
    std::bernoulli_distribution pick(0.15);
    for (int c = 0; c < m.num_cells(); ++c) {
      if (pick(rng)) marked.push_back(c);
    }
    m = bisect(m, marked);
  }
  return share(std::move(m));
}

inline Eigen::VectorXd random_vector(std::mt19937& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline DgScalar random_dg(std::mt19937& rng, const MeshPtr& mesh, double lo, double hi) {
  DgScalar w(mesh);
  w.values = random_vector(rng, 3 * mesh->num_cells(), lo, hi);
  return w;
}

enum class TKind { Identity, Masked, Pointwise };

struct Instance {
  MeshPtr mesh;
  ModelParams params;
  TKind kind = TKind::Identity;
  std::vector<bool> keep;
  DgScalar w1, w2;
  Eigen::VectorXd g;

  [[nodiscard]] OperatorT op() const {
    switch (kind) {
      case TKind::Identity: return OperatorT::identity(mesh);
      case TKind::Masked: return OperatorT::masked_identity(mesh, keep);
      case TKind::Pointwise: return OperatorT::pointwise_vector(w1, w2);
    }
    return OperatorT::identity(mesh);
  }
  [[nodiscard]] Problem problem() const { return Problem(params, op(), g); }
  [[nodiscard]] int components() const { return kind == TKind::Pointwise ? 2 : 1; }
  [[nodiscard]] int dofs() const { return components() * mesh->num_vertices(); }
};

inline Instance make_instance(std::mt19937& rng, MeshPtr mesh, TKind kind, ModelParams params) {
  Instance in;
  in.mesh = std::move(mesh);
  in.kind = kind;
  in.params = params;
  if (kind == TKind::Masked) {
    std::bernoulli_distribution keep(0.8);
    in.keep.resize(in.mesh->num_vertices());
    for (std::size_t v = 0; v < in.keep.size(); ++v) in.keep[v] = keep(rng);
    in.keep[0] = true;
  }
  if (kind == TKind::Pointwise) {
    in.w1 = random_dg(rng, in.mesh, -1.0, 1.0);
    in.w2 = random_dg(rng, in.mesh, -1.0, 1.0);
    in.g = random_vector(rng, 3 * in.mesh->num_cells(), -1.0, 1.0);
  } else {
    in.g = random_vector(rng, in.mesh->num_vertices(), 0.0, 1.0);
  }
  return in;
}

// ---------------------------------------------------------------------------
// Dense-loop oracle of the discrete energy.
//
// On each cell the data residual r is linear between its three corner values,
// so its exact mass integral is |K|/12 (sum r_i^2 + (sum r_i)^2); the L1 term
// uses the lumped weight |K|/3 per corner.

struct CellGeometry {
  std::array<Eigen::Vector2d, 3> grad;  // gradients of the barycentric functions
  double area = 0.0;
};

inline CellGeometry cell_geometry(const Mesh& mesh, int c) {
  const auto p = mesh.cell_points(c);
  Eigen::Matrix2d j;
  j << p[1].x - p[0].x, p[2].x - p[0].x, p[1].y - p[0].y, p[2].y - p[0].y;
  CellGeometry g;
  g.area = 0.5 * std::abs(j.determinant());
  const Eigen::Matrix2d jit = j.inverse().transpose();
  g.grad[1] = jit.col(0);
  g.grad[2] = jit.col(1);
  g.grad[0] = -g.grad[1] - g.grad[2];
  return g;
}

inline double mass_form(double area, const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double sa = a[0] + a[1] + a[2], sb = b[0] + b[1] + b[2];
  return area / 12.0 * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + sa * sb);
}

struct DenseOracle {
  const Instance& in;

  /// (T u) at corner i of cell c, and its derivative with respect to u.
  [[nodiscard]] double tu(const Eigen::VectorXd& u, int c, int i) const {
    const int v = in.mesh->cell(c).v[i];
    switch (in.kind) {
      case TKind::Identity: return u[v];
      case TKind::Masked: return in.keep[v] ? u[v] : 0.0;
      case TKind::Pointwise: return in.w1.values[3 * c + i] * u[2 * v] + in.w2.values[3 * c + i] * u[2 * v + 1];
    }
    return 0.0;
  }
  void add_tu_adjoint(Eigen::VectorXd& out, int c, int i, double s) const {
    const int v = in.mesh->cell(c).v[i];
    switch (in.kind) {
      case TKind::Identity: out[v] += s; break;
      case TKind::Masked:
        if (in.keep[v]) out[v] += s;
        break;
      case TKind::Pointwise:
        out[2 * v] += in.w1.values[3 * c + i] * s;
        out[2 * v + 1] += in.w2.values[3 * c + i] * s;
        break;
    }
  }
  [[nodiscard]] double data(int c, int i) const {
    const int v = in.mesh->cell(c).v[i];
    switch (in.kind) {
      case TKind::Identity: return in.g[v];
      case TKind::Masked: return in.keep[v] ? in.g[v] : 0.0;
      case TKind::Pointwise: return in.g[3 * c + i];
    }
    return 0.0;
  }

  /// Energy and, if requested, its gradient.
  double energy(const Eigen::VectorXd& u, Eigen::VectorXd* grad = nullptr) const {
    const Mesh& mesh = *in.mesh;
    const ModelParams& p = in.params;
    const int m = in.components();
    if (grad) *grad = Eigen::VectorXd::Zero(u.size());
    double e = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const CellGeometry geo = cell_geometry(mesh, c);
      const Cell& cell = mesh.cell(c);
      std::array<double, 3> r{};
      for (int i = 0; i < 3; ++i) r[i] = tu(u, c, i) - data(c, i);
      // L2 data term.
      e += 0.5 * p.alpha2 * mass_form(geo.area, r, r);
      // L1 data term, lumped.
      for (int i = 0; i < 3; ++i) e += p.alpha1 * geo.area / 3.0 * huber(r[i], p.gamma1);
      if (grad) {
        const double s = r[0] + r[1] + r[2];
        for (int i = 0; i < 3; ++i) {
          double d = p.alpha2 * geo.area / 12.0 * (r[i] + s);
          if (p.alpha1 > 0.0) d += p.alpha1 * geo.area / 3.0 * r[i] / std::max(p.gamma1, std::abs(r[i]));
          add_tu_adjoint(*grad, c, i, d);
        }
      }
      // Cell gradient, 2 x m.
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, m);
      for (int k = 0; k < m; ++k) {
        for (int i = 0; i < 3; ++i) q.col(k) += u[cell.v[i] * m + k] * geo.grad[i];
      }
      const double nq = q.norm();
      if (p.setting_s == SettingS::Identity) {
        for (int k = 0; k < m; ++k) {
          const std::array<double, 3> a{u[cell.v[0] * m + k], u[cell.v[1] * m + k], u[cell.v[2] * m + k]};
          e += 0.5 * p.beta * mass_form(geo.area, a, a);
          if (grad) {
            const double s = a[0] + a[1] + a[2];
            for (int i = 0; i < 3; ++i) (*grad)[cell.v[i] * m + k] += p.beta * geo.area / 12.0 * (a[i] + s);
          }
        }
      } else {
        e += 0.5 * p.beta * geo.area * nq * nq;
      }
      e += p.lambda * geo.area * huber(nq, p.gamma2);
      if (grad) {
        double coef = p.setting_s == SettingS::Gradient ? p.beta * geo.area : 0.0;
        if (p.lambda > 0.0 && nq > 0.0) coef += p.lambda * geo.area / std::max(p.gamma2, nq);
        for (int k = 0; k < m; ++k) {
          for (int i = 0; i < 3; ++i) (*grad)[cell.v[i] * m + k] += coef * q.col(k).dot(geo.grad[i]);
        }
      }
    }
    return e;
  }

  /// Dense matrix of a quadratic form assembled cell by cell from the oracle
  /// definitions: weights (data mass, lumped data, S term, gradient term).
  [[nodiscard]] Eigen::MatrixXd quadratic(double w_mass, double w_lumped, double w_s, double w_grad) const {
    const Mesh& mesh = *in.mesh;
    const int m = in.components();
    const int n = in.dofs();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const CellGeometry geo = cell_geometry(mesh, c);
      const Cell& cell = mesh.cell(c);
      // Rows of T restricted to the corners of the cell.
      Eigen::MatrixXd tc = Eigen::MatrixXd::Zero(3, n);
      for (int i = 0; i < 3; ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        add_tu_adjoint(row, c, i, 1.0);
        tc.row(i) = row.transpose();
      }
      Eigen::Matrix3d mloc = Eigen::Matrix3d::Constant(geo.area / 12.0);
      mloc.diagonal().array() += geo.area / 12.0;
      h += w_mass * tc.transpose() * mloc * tc;
      h += w_lumped * geo.area / 3.0 * tc.transpose() * tc;
      for (int k = 0; k < m; ++k) {
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            const int a = cell.v[i] * m + k, b = cell.v[j] * m + k;
            const double stiff = geo.area * geo.grad[i].dot(geo.grad[j]);
            const double s_term = in.params.setting_s == SettingS::Identity ? mloc(i, j) : stiff;
            h(a, b) += w_s * s_term + w_grad * stiff;
          }
        }
      }
    }
    return h;
  }

  /// Generalized Hessian of the energy: second derivatives of the Huber
  /// functions on their smooth pieces.
  [[nodiscard]] Eigen::MatrixXd hessian(const Eigen::VectorXd& u) const {
    const Mesh& mesh = *in.mesh;
    const ModelParams& p = in.params;
    const int m = in.components();
    const int n = in.dofs();
    Eigen::MatrixXd h = b_matrix();
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const CellGeometry geo = cell_geometry(mesh, c);
      const Cell& cell = mesh.cell(c);
      if (p.alpha1 > 0.0) {
        for (int i = 0; i < 3; ++i) {
          if (std::abs(tu(u, c, i) - data(c, i)) > p.gamma1) continue;
          Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
          add_tu_adjoint(row, c, i, 1.0);
          h += p.alpha1 * geo.area / 3.0 / p.gamma1 * row * row.transpose();
        }
      }
      if (p.lambda <= 0.0) continue;
      // dq/du with q flattened as (x, y) per component.
      Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(2 * m, n);
      for (int k = 0; k < m; ++k) {
        for (int i = 0; i < 3; ++i) dq.block(2 * k, cell.v[i] * m + k, 2, 1) = geo.grad[i];
      }
      const Eigen::VectorXd q = dq * u;
      const double nq = q.norm();
      Eigen::MatrixXd d2 = Eigen::MatrixXd::Identity(2 * m, 2 * m);
      if (nq <= p.gamma2) {
        d2 /= p.gamma2;
      } else {
        d2 = (d2 - q * q.transpose() / (nq * nq)) / nq;
      }
      h += p.lambda * geo.area * dq.transpose() * d2 * dq;
    }
    return h;
  }

  /// Dense B = alpha2 T^* M T + beta S.
  [[nodiscard]] Eigen::MatrixXd b_matrix() const { return quadratic(in.params.alpha2, 0.0, in.params.beta, 0.0); }
};

/// Minimizes the Huberized energy by accelerated gradient descent with the
/// constant step 1/L, where L bounds the curvature of every term and mu is the
/// smallest eigenvalue of B, then a damped Newton phase on the generalized
/// Hessian. Stops when the gradient norm is below `stationarity`.
struct GradientOracleResult {
  Eigen::VectorXd u;
  double gradient_norm = 0.0;
  int iterations = 0;
};

inline GradientOracleResult gradient_oracle(const Instance& in, double stationarity, int max_iter = 200000) {
  const DenseOracle o{in};
  const ModelParams& p = in.params;
  const Eigen::MatrixXd bound =
      o.quadratic(p.alpha2, p.alpha1 > 0.0 ? p.alpha1 / p.gamma1 : 0.0, p.beta,
                  p.lambda > 0.0 ? p.lambda / p.gamma2 : 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(bound, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(o.b_matrix(), Eigen::EigenvaluesOnly);
  const double lip = eb.eigenvalues().maxCoeff();
  const double mu = std::max(em.eigenvalues().minCoeff(), 0.0);
  const double momentum = mu > 0.0 ? (std::sqrt(lip) - std::sqrt(mu)) / (std::sqrt(lip) + std::sqrt(mu)) : 0.9;

  GradientOracleResult out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(in.dofs()), y = x, gy, gx;
  for (int it = 0; it < max_iter; ++it) {
    o.energy(x, &gx);
    out.gradient_norm = gx.norm();
    out.iterations = it;
    if (out.gradient_norm <= stationarity) break;
    o.energy(y, &gy);
    const Eigen::VectorXd xn = y - gy / lip;
    // Gradient restart keeps the iteration monotone in practice.
    if (gy.dot(xn - x) > 0.0) {
      y = x;
      continue;
    }
    y = xn + momentum * (xn - x);
    x = xn;
  }
  o.energy(x, &gx);
  out.gradient_norm = gx.norm();
  // Newton polish with a backtracking search on the gradient norm, for
  // instances whose conditioning stalls the first-order phase.
  for (int it = 0; it < 100 && out.gradient_norm > stationarity; ++it) {
    const Eigen::VectorXd d = o.hessian(x).ldlt().solve(-gx);
    double t = 1.0;
    for (; t > 1e-12; t *= 0.5) {
      Eigen::VectorXd gt;
      o.energy(x + t * d, &gt);
      if (gt.norm() < out.gradient_norm) {
        x += t * d;
        gx = gt;
        out.gradient_norm = gt.norm();
        break;
      }
    }
    ++out.iterations;
    if (t <= 1e-12) break;
  }
  out.u = x;
  return out;
}

/// Squared B-norm from the dense oracle matrix.
inline double b_norm_squared(const Instance& in, const Eigen::VectorXd& v) {
  return v.dot(DenseOracle{in}.b_matrix() * v);
}

// ---------------------------------------------------------------------------
// Dense-loop metric oracles.

inline ImageGrid random_image(std::mt19937& rng, int n1, int n2) {
  ImageGrid img(n1, n2);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (double& v : img.values) v = d(rng);
  return img;
}

inline double psnr_oracle(const ImageGrid& a, const ImageGrid& b) {
  double s = 0.0;
  for (int j = 0; j < a.n2; ++j) {
    for (int i = 0; i < a.n1; ++i) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  }
  return -10.0 * std::log10(s / (a.n1 * a.n2));
}

inline double ssim_oracle(const ImageGrid& a, const ImageGrid& b) {
  const int w = 11;
  double kernel[w][w];
  double total = 0.0;
  for (int y = 0; y < w; ++y) {
    for (int x = 0; x < w; ++x) {
      kernel[y][x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / (2 * 1.5 * 1.5));
      total += kernel[y][x];
    }
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double sum = 0.0;
  int count = 0;
  for (int j0 = 0; j0 + w <= a.n2; ++j0) {
    for (int i0 = 0; i0 + w <= a.n1; ++i0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = 0; y < w; ++y) {
        for (int x = 0; x < w; ++x) {
          const double k = kernel[y][x] / total, va = a(i0 + x, j0 + y), vb = b(i0 + x, j0 + y);
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return sum / count;
}

inline FlowRaster random_flow(std::mt19937& rng, int n1, int n2, double scale) {
  FlowRaster f(n1, n2);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (std::size_t k = 0; k < f.size(); ++k) {
    f.u[k] = d(rng);
    f.v[k] = d(rng);
  }
  return f;
}

inline FlowErrors flow_errors_oracle(const FlowRaster& est, const FlowRaster& gt) {
  double ee = 0, ee2 = 0, ae = 0, ae2 = 0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double e = std::hypot(est.u[k] - gt.u[k], est.v[k] - gt.v[k]);
    const double c = (est.u[k] * gt.u[k] + est.v[k] * gt.v[k] + 1.0) /
                     std::sqrt((est.u[k] * est.u[k] + est.v[k] * est.v[k] + 1.0) * (gt.u[k] * gt.u[k] + gt.v[k] * gt.v[k] + 1.0));
    const double a = std::acos(std::clamp(c, -1.0, 1.0));
    ee += e;
    ee2 += e * e;
    ae += a;
    ae2 += a * a;
  }
  const double n = static_cast<double>(est.size());
  FlowErrors out;
  out.ee_mean = ee / n;
  out.ae_mean = ae / n;
  out.ee_std = std::sqrt(std::max(ee2 / n - out.ee_mean * out.ee_mean, 0.0));
  out.ae_std = std::sqrt(std::max(ae2 / n - out.ae_mean * out.ae_mean, 0.0));
  out.count = est.size();
  return out;
}

}  // namespace tvafem::testkit
