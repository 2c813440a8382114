#include <Eigen/QR>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>

#include "tvafem/apps.hpp"

namespace tvafem {

double default_theta(IndicatorChoice c) { return c == IndicatorChoice::Residual ? 0.5 : 0.99; }

int coarsened_vertex_count(int n, int n_coarsen) {
  if (n_coarsen < 0) throw std::invalid_argument("n_coarsen must be nonnegative");
  const double scale = std::pow(2.0, -0.5 * n_coarsen);
  // Tiny slack so exact powers of two are not lost to rounding.
  return std::max(2, static_cast<int>(std::floor(n * scale + 1e-9)));
}

int refinement_count(int n1, int n2, int k1, int k2) {
  const double image_cells = 2.0 * (n1 - 1) * (n2 - 1);
  const double initial_cells = 2.0 * (k1 - 1) * (k2 - 1);
  return std::max(0, static_cast<int>(std::floor(std::log2(image_cells / initial_cells) + 1e-12)));
}

ImageGrid fill_masked_nearest(const ImageGrid& image, const std::vector<bool>& keep) {
  if (keep.size() != image.size()) throw std::invalid_argument("fill_masked_nearest: size mismatch");
  ImageGrid out = image;
  std::vector<bool> done(keep);
  std::deque<int> queue;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k]) queue.push_back(static_cast<int>(k));
  }
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop_front();
    const int i = k % image.n1, j = k / image.n1;
    const std::array<std::array<int, 2>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
    for (const auto& [a, b] : nb) {
      if (a < 0 || b < 0 || a >= image.n1 || b >= image.n2) continue;
      const int q = b * image.n1 + a;
      if (done[q]) continue;
      done[q] = true;
      out.values[q] = out.values[k];
      queue.push_back(q);
    }
  }
  return out;
}

std::vector<int> cells_touching_mask(const Mesh& mesh, const std::vector<bool>& keep, int n1, int n2) {
  std::vector<int> out;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto q = cell_quadrature(mesh, c);
    const auto corners = mesh.cell_points(c);
    for (const auto& b : q.bary) {
      const Point p = bary_to_point(corners, b);
      const int i = std::clamp(static_cast<int>(std::lround(p.x)) - 1, 0, n1 - 1);
      const int j = std::clamp(static_cast<int>(std::lround(p.y)) - 1, 0, n2 - 1);
      if (!keep[static_cast<std::size_t>(j) * n1 + i]) {
        out.push_back(c);
        break;
      }
    }
  }
  return out;
}

InpaintResult inpaint(const InpaintTask& task) {
  const auto start = std::chrono::steady_clock::now();
  const ImageGrid& img = task.image;
  const int n1 = img.n1, n2 = img.n2;
  if (n1 < 2 || n2 < 2) throw std::invalid_argument("inpaint: image must be at least 2 x 2");
  if (task.keep.size() != img.size()) throw std::invalid_argument("inpaint: mask and image sizes differ");
  if (task.reference && !task.reference->same_shape(img)) {
    throw std::invalid_argument("inpaint: reference and image sizes differ");
  }
  InpaintResult out;
  out.initial_vertices_x = coarsened_vertex_count(n1, task.n_coarsen);
  out.initial_vertices_y = coarsened_vertex_count(n2, task.n_coarsen);
  out.n_refine = refinement_count(n1, n2, out.initial_vertices_x, out.initial_vertices_y);
  const InterpMethod interp = out.n_refine == 0 ? InterpMethod::Nodal : task.interp;

  const ImageGrid data = fill_masked_nearest(img, task.keep);
  auto mesh = std::make_shared<const Mesh>(
      build_scaled_image_mesh(n1, n2, out.initial_vertices_x, out.initial_vertices_y));
  Discretizer discretize = [&](const MeshPtr& m) {
    return Discretization{OperatorT::masked_identity(m, task.keep, n1, n2), interpolate_image(data, m, interp).values};
  };
  AfemOptions opt;
  opt.indicator = task.indicator;
  opt.theta = task.theta < 0.0 ? default_theta(task.indicator) : task.theta;
  opt.n_refine = out.n_refine;
  opt.solve = task.solve;
  opt.forced = [&](const Mesh& m) { return cells_touching_mask(m, task.keep, n1, n2); };
  opt.on_iterate = task.on_iterate;
  out.afem = afem_loop(mesh, task.params, discretize, opt);
  out.mesh = out.afem.mesh;
  out.u = FeScalar(out.mesh, out.afem.u);
  out.restored = resample_to_image(out.u, n1, n2);
  if (task.reference) {
    out.psnr = psnr(out.restored, *task.reference);
    out.ssim = ssim(out.restored, *task.reference);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ImageGrid warp_image(const ImageGrid& f1, const FeVector& u, const PixelSampling& s) {
  if (u.m != 2) throw std::invalid_argument("warp_image: flow must have two components");
  ImageGrid out(s.n1, s.n2);
  for (int j = 0; j < s.n2; ++j) {
    for (int i = 0; i < s.n1; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * s.n1 + i;
      if (s.cell[k] < 0) throw std::out_of_range("warp_image: pixel outside mesh domain");
      const Cell& c = u.mesh->cell(s.cell[k]);
      double du = 0.0, dv = 0.0;
      for (int l = 0; l < 3; ++l) {
        du += s.bary[k][l] * u.values[2 * c.v[l]];
        dv += s.bary[k][l] * u.values[2 * c.v[l] + 1];
      }
      out.values[k] = sample_bicubic(f1, {i + 1.0 + du, j + 1.0 + dv});
    }
  }
  return out;
}

FeScalar warp_image(const ImageGrid& f1, const FeVector& u, InterpMethod projection) {
  const PixelSampling s = sample_pixels(*u.mesh, f1.n1, f1.n2);
  return interpolate_image(warp_image(f1, u, s), u.mesh, projection);
}

std::array<DgScalar, 2> warped_gradient(const ImageGrid& f1, const FeVector& u) {
  const Mesh& mesh = *u.mesh;
  std::array<DgScalar, 2> out{DgScalar(u.mesh), DgScalar(u.mesh)};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto corners = mesh.cell_points(c);
    const Cell& cell = mesh.cell(c);
    const Point center = mesh.barycenter(c);
    const double h = mesh.diameter(c);
    const auto q = lattice_quadrature(std::max(2, lattice_degree(h)), mesh.area(c));
    Eigen::MatrixXd a(q.size(), 6);
    Eigen::VectorXd rhs(q.size());
    for (int k = 0; k < q.size(); ++k) {
      const auto& b = q.bary[k];
      const Point p = bary_to_point(corners, b);
      double du = 0.0, dv = 0.0;
      for (int l = 0; l < 3; ++l) {
        du += b[l] * u.values[2 * cell.v[l]];
        dv += b[l] * u.values[2 * cell.v[l] + 1];
      }
      const double x = (p.x - center.x) / h, y = (p.y - center.y) / h;
      a.row(k) << 1.0, x, y, x * x, x * y, y * y;
      rhs[k] = sample_bicubic(f1, {p.x + du, p.y + dv});
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
    for (int i = 0; i < 3; ++i) {
      const double x = (corners[i].x - center.x) / h, y = (corners[i].y - center.y) / h;
      out[0].values[3 * c + i] = (coef[1] + 2 * coef[3] * x + coef[4] * y) / h;
      out[1].values[3 * c + i] = (coef[2] + coef[4] * x + 2 * coef[5] * y) / h;
    }
  }
  return out;
}

namespace {

double raster_distance(const ImageGrid& a, const ImageGrid& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a.values[k] - b.values[k]) * (a.values[k] - b.values[k]);
  return std::sqrt(s);
}

}  // namespace

FlowResult optical_flow(const FlowTask& task) {
  const auto start = std::chrono::steady_clock::now();
  const int n1 = task.f0.n1, n2 = task.f0.n2;
  if (!task.f0.same_shape(task.f1)) throw std::invalid_argument("optical_flow: frame sizes differ");
  if (n1 < 2 || n2 < 2) throw std::invalid_argument("optical_flow: frames must be at least 2 x 2");
  const int k1 = std::max(2, static_cast<int>(std::floor(n1 * task.initial_scale + 1e-9)));
  const int k2 = std::max(2, static_cast<int>(std::floor(n2 * task.initial_scale + 1e-9)));

  FlowResult out;
  MeshPtr mesh = std::make_shared<const Mesh>(build_scaled_image_mesh(n1, n2, k1, k2));
  PixelSampling sampling = sample_pixels(*mesh, n1, n2);
  FeVector u(mesh, 2);
  DualPair p;
  bool have_dual = false;
  FeScalar f0h = interpolate_image(task.f0, mesh, task.interp);
  ImageGrid fw = warp_image(task.f1, u, sampling);
  FeScalar fwh = interpolate_image(fw, mesh, task.interp);
  double diff = raster_distance(fw, task.f0);

  for (int it = 1; it <= task.max_warps; ++it) {
    const auto iter_start = std::chrono::steady_clock::now();
    // Linearization around the previous warp: T u = grad f_w . u and
    // g = grad f_w . u_{k-1} - (f_w - f_0), both at cell corners.
    auto w = warped_gradient(task.f1, u);
    const OperatorT t = OperatorT::pointwise_vector(w[0], w[1]);
    const Eigen::VectorXd tu = t.matrix() * u.values;
    const DgScalar diff_dg = to_dg(FeScalar(mesh, fwh.values - f0h.values));
    Problem pb(task.params, t, tu - diff_dg.values);
    out.coercive = pb.b().audit().coercive;

    SolveResult res = have_dual ? solve(pb, u.values, p, task.solve) : solve(pb, u.values, pb.zero_dual(), task.solve);
    out.all_converged = out.all_converged && res.report.converged;
    if (task.on_iterate) task.on_iterate(it, pb, res);
    u = FeVector(mesh, 2, res.u);
    p = res.p;
    have_dual = true;
    out.flows.push_back(u);

    ImageGrid fw_new = warp_image(task.f1, u, sampling);
    const double diff_new = raster_distance(fw_new, task.f0);
    FlowTraceRow row;
    row.iteration = it;
    row.cells = mesh->num_cells();
    row.diff_before = diff;
    row.diff_after = diff_new;
    row.improvement = diff > 0.0 ? (diff - diff_new) / diff : 0.0;
    row.solver_iterations = res.report.iterations;
    row.converged = res.report.converged;
    fw = std::move(fw_new);
    diff = diff_new;

    const bool stalled = row.improvement < task.eps_warp;
    if (stalled && out.refinements >= task.total_refinements) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - iter_start).count();
      out.trace.push_back(row);
      break;
    }
    if (stalled) {
      const IndicatorField eta = compute_indicator(task.indicator, pb, res.u, res.p);
      const std::vector<int> marked = dorfler_mark(eta, task.theta);
      MeshPtr fine = std::make_shared<const Mesh>(bisect(*mesh, marked));
      u = prolongate(u, fine);
      p = prolongate(p, DataSpace::Corner, mesh, fine);
      mesh = fine;
      sampling = sample_pixels(*mesh, n1, n2);
      f0h = interpolate_image(task.f0, mesh, task.interp);
      ++out.refinements;
      row.refined = true;
    }
    fwh = interpolate_image(fw, mesh, task.interp);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - iter_start).count();
    out.trace.push_back(row);
  }
  out.mesh = mesh;
  out.u = u;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_flow_trace_csv(std::ostream& out, const std::vector<FlowTraceRow>& trace) {
  out << "iteration,cells,diff_before,diff_after,improvement,refined,solver_iterations,converged,seconds\n";
  out.precision(12);
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.cells << ',' << r.diff_before << ',' << r.diff_after << ',' << r.improvement << ','
        << (r.refined ? 1 : 0) << ',' << r.solver_iterations << ',' << (r.converged ? 1 : 0) << ',' << r.seconds
        << '\n';
  }
}

}  // namespace tvafem
