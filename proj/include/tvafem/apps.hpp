#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tvafem/adapt.hpp"
#include "tvafem/fe_space.hpp"
#include "tvafem/image.hpp"
#include "tvafem/model.hpp"
#include "tvafem/solver.hpp"

namespace tvafem {

// ---------------------------------------------------------------------------
// Metrics

/// -10 log10(mean squared difference); +inf for identical images.
double psnr(const ImageGrid& a, const ImageGrid& b);
/// Mean SSIM over all 11 x 11 Gaussian windows (sigma 1.5) that fit inside the
/// image, C1 = 0.01^2, C2 = 0.03^2. Smaller images use the largest odd window
/// that fits.
double ssim(const ImageGrid& a, const ImageGrid& b);

/// Dense displacement field on the pixel raster, row-major like ImageGrid.
struct FlowRaster {
  int n1 = 0;
  int n2 = 0;
  std::vector<double> u;
  std::vector<double> v;

  FlowRaster() = default;
  FlowRaster(int width, int height, double fu = 0.0, double fv = 0.0);
  [[nodiscard]] std::size_t size() const { return u.size(); }
};

/// Values above this magnitude mark unknown flow.
inline constexpr double kUnknownFlow = 1e9;

bool flow_valid(double u, double v);

struct FlowErrors {
  double ee_mean = 0.0;
  double ee_std = 0.0;
  double ae_mean = 0.0;
  double ae_std = 0.0;
  std::size_t count = 0;
};

/// Endpoint error and angle between (u, v, 1) vectors in radians; means and
/// population standard deviations over pixels where the ground truth is valid
/// and `valid` (if given) is true.
FlowErrors flow_errors(const FlowRaster& est, const FlowRaster& gt, const std::vector<bool>* valid = nullptr);

/// Middlebury color-wheel rendering; |flow| = max_norm is fully saturated.
RgbImage flow_to_color(const FlowRaster& flow, double max_norm);

FlowRaster read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowRaster& flow);

FlowRaster flow_raster(const FeVector& u, const PixelSampling& s);

// ---------------------------------------------------------------------------
// Inpainting

struct InpaintTask {
  ImageGrid image;
  /// One flag per pixel; false marks the inpainting domain.
  std::vector<bool> keep;
  ModelParams params{0.0, 50.0, 1e-5, 1.0, 1e-4, 1e-4, SettingS::Identity};
  int n_coarsen = 0;
  InterpMethod interp = InterpMethod::QiLagrange;
  IndicatorChoice indicator = IndicatorChoice::Residual;
  /// Negative selects the default for the indicator (0.5 residual, 0.99 primal-dual).
  double theta = -1.0;
  SolveOptions solve{1e-4, 300, 1e-8, 1e-10};
  std::optional<ImageGrid> reference;
  std::function<void(int, const Problem&, const SolveResult&)> on_iterate;
};

struct InpaintResult {
  ImageGrid restored;
  MeshPtr mesh;
  FeScalar u;
  AfemResult afem;
  int initial_vertices_x = 0;
  int initial_vertices_y = 0;
  int n_refine = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double seconds = 0.0;
};

double default_theta(IndicatorChoice c);
/// Vertices per dimension of the initial mesh: floor(n / 2^(n_coarsen/2)), at least 2.
int coarsened_vertex_count(int n, int n_coarsen);
/// floor(log2(image cells / initial cells)).
int refinement_count(int n1, int n2, int k1, int k2);
/// Copy of `image` whose masked pixels take the value of the nearest kept
/// pixel (4-neighbour breadth-first order), so projections onto coarse cells
/// only see data from outside the inpainting domain. Unchanged if nothing is kept.
ImageGrid fill_masked_nearest(const ImageGrid& image, const std::vector<bool>& keep);
/// Cells having a quadrature lattice point whose nearest pixel is masked.
std::vector<int> cells_touching_mask(const Mesh& mesh, const std::vector<bool>& keep, int n1, int n2);

InpaintResult inpaint(const InpaintTask& task);

// ---------------------------------------------------------------------------
// Optical flow

/// f1 sampled bicubically at x + u(x) for every pixel x.
ImageGrid warp_image(const ImageGrid& f1, const FeVector& u, const PixelSampling& s);
FeScalar warp_image(const ImageGrid& f1, const FeVector& u, InterpMethod projection);

/// Gradient of x -> f1(x + u(x)) as two DG1 fields, from a per-cell least
/// squares quadratic fit over a lattice of degree max(2, ceil(diam)).
std::array<DgScalar, 2> warped_gradient(const ImageGrid& f1, const FeVector& u);

struct FlowTask {
  ImageGrid f0;
  ImageGrid f1;
  ModelParams params{10.0, 0.0, 1e-5, 1.0, 1e-4, 1e-4, SettingS::Gradient};
  double eps_warp = 5e-2;
  /// Initial vertices per dimension are floor(n * initial_scale), at least 2.
  double initial_scale = 0.125;
  int total_refinements = 6;
  int max_warps = 60;
  InterpMethod interp = InterpMethod::L2Lagrange;
  IndicatorChoice indicator = IndicatorChoice::Residual;
  double theta = 0.5;
  SolveOptions solve{1e-3, 300, 1e-8, 1e-10};
  std::function<void(int, const Problem&, const SolveResult&)> on_iterate;
};

struct FlowTraceRow {
  int iteration = 0;
  int cells = 0;
  double diff_before = 0.0;
  double diff_after = 0.0;
  double improvement = 0.0;
  bool refined = false;
  int solver_iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

struct FlowResult {
  std::vector<FeVector> flows;
  MeshPtr mesh;
  FeVector u;
  std::vector<FlowTraceRow> trace;
  int refinements = 0;
  bool all_converged = true;
  bool coercive = false;
  double seconds = 0.0;
};

FlowResult optical_flow(const FlowTask& task);

/// Columns: iteration, cells, diff_before, diff_after, improvement, refined,
/// solver_iterations, converged, seconds.
void write_flow_trace_csv(std::ostream& out, const std::vector<FlowTraceRow>& trace);

}  // namespace tvafem
