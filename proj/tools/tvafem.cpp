// Command-line front end: synth, interp-bench, inpaint, optflow.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvafem/apps.hpp"
#include "tvafem/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tvafem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitNotConverged = 3;

struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string>;

double to_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    throw BadInput("invalid number for " + key + ": " + it->second);
  }
  if (pos != it->second.size()) throw BadInput("invalid number for " + key + ": " + it->second);
  return v;
}

int to_int(const KeyValues& kv, const std::string& key, int fallback) {
  const double v = to_double(kv, key, fallback);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw BadInput("expected an integer for " + key);
  return static_cast<int>(v);
}

std::string to_str(const KeyValues& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Flag name -> config key; a flag overrides the config file, which overrides defaults.
struct Overrides {
  std::map<std::string, std::string> values;
  std::multimap<std::string, CLI::Option*> options;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    options.emplace(key, app->add_option(flag, values[key], help));
  }
  void apply(KeyValues& kv) const {
    // Several subcommands share a key; only the parsed one has a count.
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) kv[key] = values.at(key);
    }
  }
};

struct RunContext {
  std::string command;
  fs::path out_dir;
  std::string config_path;
  Overrides flags;
  KeyValues kv;
  json manifest;
  std::vector<std::string> outputs;

  void load(const std::set<std::string>& allowed) {
    if (out_dir.empty()) throw BadInput("--out-dir is required");
    fs::create_directories(out_dir);
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw BadInput("config file not found: " + config_path);
      kv = read_key_value_file(config_path);
    }
    flags.apply(kv);
    for (const auto& [key, value] : kv) {
      if (!allowed.count(key)) throw BadInput("unknown configuration key for " + command + ": " + key);
    }
  }

  fs::path out(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }

  void write_manifest(int exit_code) {
    if (out_dir.empty() || !fs::exists(out_dir)) return;
    manifest["command"] = command;
    manifest["exit_code"] = exit_code;
    manifest["outputs"] = outputs;
    if (!config_path.empty()) manifest["config_file"] = config_path;
    std::ofstream f(out_dir / "manifest.json");
    f << manifest.dump(2) << '\n';
  }
};

const std::set<std::string> kModelKeys{"alpha1", "alpha2", "beta", "lambda", "gamma1", "gamma2", "setting_S"};

std::set<std::string> with_model_keys(std::set<std::string> keys) {
  keys.insert(kModelKeys.begin(), kModelKeys.end());
  return keys;
}

void add_model_flags(CLI::App* app, Overrides& o) {
  o.add(app, "--alpha1", "alpha1", "L1 data weight");
  o.add(app, "--alpha2", "alpha2", "L2 data weight");
  o.add(app, "--beta", "beta", "weight of the S term");
  o.add(app, "--lambda", "lambda", "total variation weight");
  o.add(app, "--gamma1", "gamma1", "Huber parameter of the L1 term");
  o.add(app, "--gamma2", "gamma2", "Huber parameter of the TV term");
  o.add(app, "--setting-s", "setting_S", "S operator {id|grad}");
}

void add_common_flags(CLI::App* app, Overrides& o) {
  o.add(app, "--tol", "tol", "solver residual tolerance");
  o.add(app, "--max-iter", "max_iter", "solver iteration cap");
  o.add(app, "--threads", "threads", "worker threads (recorded; computation is sequential)");
  o.add(app, "--seed", "seed", "random seed (recorded; the drivers are deterministic)");
}

json params_json(const ModelParams& p) {
  return {{"alpha1", p.alpha1}, {"alpha2", p.alpha2}, {"beta", p.beta},   {"lambda", p.lambda},
          {"gamma1", p.gamma1}, {"gamma2", p.gamma2}, {"setting_S", to_string(p.setting_s)}};
}

ModelParams resolve_params(const KeyValues& kv, const ModelParams& defaults) {
  try {
    return params_from_config(kv, defaults);
  } catch (const std::invalid_argument& e) {
    throw BadInput(e.what());
  }
}

SolveOptions resolve_solve(const KeyValues& kv, SolveOptions s) {
  s.tol = to_double(kv, "tol", s.tol);
  s.max_iter = to_int(kv, "max_iter", s.max_iter);
  if (!(s.tol > 0.0)) throw BadInput("tol must be positive");
  if (s.max_iter < 1) throw BadInput("max_iter must be at least 1");
  return s;
}

void record_run_keys(RunContext& ctx, const SolveOptions& s) {
  const int threads = to_int(ctx.kv, "threads", 1);
  if (threads < 1) throw BadInput("threads must be at least 1");
  ctx.manifest["config"]["tol"] = s.tol;
  ctx.manifest["config"]["max_iter"] = s.max_iter;
  ctx.manifest["config"]["threads"] = threads;
  ctx.manifest["config"]["seed"] = to_int(ctx.kv, "seed", 0);
}

template <class Parse>
auto parse_or_bad(Parse parse, const std::string& value) {
  try {
    return parse(value);
  } catch (const std::invalid_argument& e) {
    throw BadInput(e.what());
  }
}

ImageGrid load_image(const std::string& path, const char* what) {
  if (path.empty()) throw BadInput(std::string(what) + " is required");
  if (!fs::exists(path)) throw BadInput(std::string(what) + " not found: " + path);
  try {
    return read_image(path);
  } catch (const std::exception& e) {
    throw BadInput(e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

int run_synth(RunContext& ctx) {
  ctx.load({"size", "shift_x", "shift_y", "stroke_width"});
  const int n = to_int(ctx.kv, "size", 64);
  const double sx = to_double(ctx.kv, "shift_x", 3.0), sy = to_double(ctx.kv, "shift_y", 1.0);
  const double width = to_double(ctx.kv, "stroke_width", 3.0);
  if (n < 2) throw BadInput("size must be at least 2");
  if (!(width > 0.0)) throw BadInput("stroke_width must be positive");
  ctx.manifest["config"] = {{"size", n}, {"shift_x", sx}, {"shift_y", sy}, {"stroke_width", width}};

  const ImageGrid clean = synthetic_image(n, n);
  const auto keep = synthetic_stroke_mask(n, n, width);
  ImageGrid mask(n, n);
  for (std::size_t k = 0; k < keep.size(); ++k) mask.values[k] = keep[k] ? 1.0 : 0.0;
  write_image(ctx.out("clean.png"), clean, 16);
  write_image(ctx.out("mask.pgm"), mask);
  write_image(ctx.out("corrupted.png"), apply_mask(clean, keep), 16);
  const FlowPair pair = synthetic_flow_pair(n, n, sx, sy);
  write_image(ctx.out("frame0.png"), pair.f0, 16);
  write_image(ctx.out("frame1.png"), pair.f1, 16);
  write_flo(ctx.out("flow_gt.flo"), pair.truth);
  return kExitOk;
}

int run_interp_bench(RunContext& ctx, const std::string& input) {
  ctx.load({"counts", "methods"});
  const ImageGrid img = load_image(input, "--input");
  std::vector<int> counts;
  if (ctx.kv.count("counts")) {
    for (const auto& s : split_list(ctx.kv["counts"])) {
      KeyValues one{{"count", s}};
      counts.push_back(to_int(one, "count", 0));
    }
  } else {
    counts = {img.n1, img.n1 / 2, img.n1 * 13 / 32};
  }
  std::vector<InterpMethod> methods;
  for (const auto& s : split_list(to_str(ctx.kv, "methods", "nodal,l2-lagrange,qi-lagrange,l2-pixel"))) {
    methods.push_back(parse_or_bad(parse_interp_method, s));
  }
  if (counts.empty() || methods.empty()) throw BadInput("counts and methods must be non-empty");
  for (int c : counts) {
    if (c < 2 || c > img.n1) throw BadInput("vertex counts must lie in [2, image width]");
  }
  ctx.manifest["config"] = {{"input", input}, {"counts", counts}};
  for (auto m : methods) ctx.manifest["config"]["methods"].push_back(std::string(to_string(m)));

  std::ostringstream csv;
  csv << "vertices,method,psnr,ssim\n";
  for (int c : counts) {
    const int c2 = std::max(2, static_cast<int>(std::lround(static_cast<double>(c) * img.n2 / img.n1)));
    auto mesh = std::make_shared<const Mesh>(build_scaled_image_mesh(img.n1, img.n2, c, std::min(c2, img.n2)));
    const PixelSampling s = sample_pixels(*mesh, img.n1, img.n2);
    for (auto m : methods) {
      const ImageGrid r = resample_to_image(interpolate_image(img, mesh, m), s);
      csv << c << ',' << to_string(m) << ',' << fmt(psnr(r, img)) << ',' << fmt(ssim(r, img)) << '\n';
      write_image(ctx.out("interp_" + std::string(to_string(m)) + "_" + std::to_string(c) + ".png"), r);
    }
  }
  write_text(ctx.out("interp_bench.csv"), csv.str());
  return kExitOk;
}

int run_inpaint(RunContext& ctx, const std::string& input, const std::string& mask_path,
                const std::string& reference) {
  ctx.load(with_model_keys({"n_coarsen", "theta_mark", "indicator", "interp", "tol", "max_iter", "threads", "seed"}));
  InpaintTask task;
  task.image = load_image(input, "--input");
  if (mask_path.empty()) throw BadInput("--mask is required");
  if (!fs::exists(mask_path)) throw BadInput("mask not found: " + mask_path);
  int m1 = 0, m2 = 0;
  try {
    task.keep = read_mask(mask_path, &m1, &m2);
  } catch (const std::exception& e) {
    throw BadInput(e.what());
  }
  if (m1 != task.image.n1 || m2 != task.image.n2) throw BadInput("mask and image sizes differ");
  if (!reference.empty()) {
    task.reference = load_image(reference, "--reference");
    if (!task.reference->same_shape(task.image)) throw BadInput("reference and image sizes differ");
  }
  task.params = resolve_params(ctx.kv, task.params);
  task.n_coarsen = to_int(ctx.kv, "n_coarsen", 0);
  if (task.n_coarsen < 0) throw BadInput("n_coarsen must be nonnegative");
  task.indicator = parse_or_bad(parse_indicator_choice, to_str(ctx.kv, "indicator", "residual"));
  task.interp = parse_or_bad(parse_interp_method, to_str(ctx.kv, "interp", "qi-lagrange"));
  task.theta = to_double(ctx.kv, "theta_mark", default_theta(task.indicator));
  if (!(task.theta >= 0.0 && task.theta <= 1.0)) throw BadInput("theta_mark must lie in [0, 1]");
  task.solve = resolve_solve(ctx.kv, task.solve);

  ctx.manifest["config"] = {{"input", input},
                            {"mask", mask_path},
                            {"reference", reference},
                            {"params", params_json(task.params)},
                            {"n_coarsen", task.n_coarsen},
                            {"indicator", to_string(task.indicator)},
                            {"interp", std::string(to_string(task.interp))},
                            {"theta_mark", task.theta}};
  record_run_keys(ctx, task.solve);

  task.on_iterate = [&](int it, const Problem& pb, const SolveResult& res) {
    std::ofstream mesh_out(ctx.out("mesh_" + std::to_string(it) + ".vtk"));
    write_vtk(*pb.mesh(), mesh_out);
    std::ofstream trace(ctx.out("solve_" + std::to_string(it) + ".csv"));
    write_trace_csv(trace, res.report);
  };
  const InpaintResult r = inpaint(task);
  write_image(ctx.out("restored.png"), r.restored, 16);
  {
    std::ofstream f(ctx.out("mesh_final.off"));
    write_off(*r.mesh, f);
  }
  {
    std::ofstream f(ctx.out("afem_trace.csv"));
    write_afem_trace_csv(f, r.afem.trace);
  }
  std::ostringstream csv;
  const bool ref = task.reference.has_value();
  csv << "n_coarsen,n_refine,cells,psnr,ssim,seconds\n"
      << task.n_coarsen << ',' << r.n_refine << ',' << r.mesh->num_cells() << ',' << (ref ? fmt(r.psnr) : "nan")
      << ',' << (ref ? fmt(r.ssim) : "nan") << ',' << fmt(r.seconds) << '\n';
  write_text(ctx.out("inpaint.csv"), csv.str());
  ctx.manifest["converged"] = r.afem.all_converged;
  return r.afem.all_converged ? kExitOk : kExitNotConverged;
}

int run_optflow(RunContext& ctx, const std::string& frame0, const std::string& frame1, const std::string& gt_path) {
  ctx.load(with_model_keys({"theta_mark", "indicator", "interp", "tol", "max_iter", "threads", "seed", "eps_warp",
                            "initial_scale", "total_refinements", "max_warps"}));
  FlowTask task;
  task.f0 = load_image(frame0, "--frame0");
  task.f1 = load_image(frame1, "--frame1");
  if (!task.f0.same_shape(task.f1)) throw BadInput("frame sizes differ");
  std::optional<FlowRaster> gt;
  if (!gt_path.empty()) {
    if (!fs::exists(gt_path)) throw BadInput("ground-truth flow not found: " + gt_path);
    try {
      gt = read_flo(gt_path);
    } catch (const std::exception& e) {
      throw BadInput(e.what());
    }
    if (gt->n1 != task.f0.n1 || gt->n2 != task.f0.n2) throw BadInput("ground-truth flow size differs from frames");
  }
  task.params = resolve_params(ctx.kv, task.params);
  task.indicator = parse_or_bad(parse_indicator_choice, to_str(ctx.kv, "indicator", "residual"));
  task.interp = parse_or_bad(parse_interp_method, to_str(ctx.kv, "interp", "l2-lagrange"));
  task.theta = to_double(ctx.kv, "theta_mark", task.theta);
  task.eps_warp = to_double(ctx.kv, "eps_warp", task.eps_warp);
  task.initial_scale = to_double(ctx.kv, "initial_scale", task.initial_scale);
  task.total_refinements = to_int(ctx.kv, "total_refinements", task.total_refinements);
  task.max_warps = to_int(ctx.kv, "max_warps", task.max_warps);
  if (!(task.theta >= 0.0 && task.theta <= 1.0)) throw BadInput("theta_mark must lie in [0, 1]");
  if (!(task.initial_scale > 0.0 && task.initial_scale <= 1.0)) throw BadInput("initial_scale must lie in (0, 1]");
  if (task.total_refinements < 0 || task.max_warps < 1) throw BadInput("invalid refinement or warp count");
  task.solve = resolve_solve(ctx.kv, task.solve);

  ctx.manifest["config"] = {{"frame0", frame0},
                            {"frame1", frame1},
                            {"gt_flow", gt_path},
                            {"params", params_json(task.params)},
                            {"indicator", to_string(task.indicator)},
                            {"interp", std::string(to_string(task.interp))},
                            {"theta_mark", task.theta},
                            {"eps_warp", task.eps_warp},
                            {"initial_scale", task.initial_scale},
                            {"total_refinements", task.total_refinements},
                            {"max_warps", task.max_warps}};
  record_run_keys(ctx, task.solve);

  const FlowResult r = optical_flow(task);
  const PixelSampling s = sample_pixels(*r.mesh, task.f0.n1, task.f0.n2);
  const FlowRaster est = flow_raster(r.u, s);
  write_flo(ctx.out("flow.flo"), est);
  double max_norm = 0.0;
  const FlowRaster& scale_src = gt ? *gt : est;
  for (std::size_t k = 0; k < scale_src.size(); ++k) {
    if (flow_valid(scale_src.u[k], scale_src.v[k])) max_norm = std::max(max_norm, std::hypot(scale_src.u[k], scale_src.v[k]));
  }
  write_png_rgb(ctx.out("flow.png"), flow_to_color(est, max_norm > 0.0 ? max_norm : 1.0));
  {
    std::ofstream f(ctx.out("flow_trace.csv"));
    write_flow_trace_csv(f, r.trace);
  }
  {
    std::ofstream f(ctx.out("mesh_final.vtk"));
    write_vtk(*r.mesh, f);
  }
  std::ostringstream csv;
  csv << "warps,cells,refinements,seconds";
  if (gt) csv << ",ee_mean,ee_std,ae_mean,ae_std";
  csv << '\n' << r.trace.size() << ',' << r.mesh->num_cells() << ',' << r.refinements << ',' << fmt(r.seconds);
  if (gt) {
    const FlowErrors e = flow_errors(est, *gt);
    csv << ',' << fmt(e.ee_mean) << ',' << fmt(e.ee_std) << ',' << fmt(e.ae_mean) << ',' << fmt(e.ae_std);
    ctx.manifest["ee_mean"] = e.ee_mean;
    ctx.manifest["ae_mean"] = e.ae_mean;
  }
  csv << '\n';
  write_text(ctx.out("optflow.csv"), csv.str());
  ctx.manifest["converged"] = r.all_converged;
  ctx.manifest["coercive"] = r.coercive;
  return r.all_converged ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive finite element TV restoration: inpainting and optical flow"};
  app.require_subcommand(1);

  RunContext ctx;
  std::string input, mask, reference, frame0, frame1, gt_flow;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", ctx.out_dir, "output directory")->required();
    sub->add_option("--config", ctx.config_path, "key = value configuration file");
  };

  CLI::App* synth = app.add_subcommand("synth", "write the synthetic inpainting and flow test data");
  common(synth);
  ctx.flags.add(synth, "--size", "size", "image size in pixels (square)");
  ctx.flags.add(synth, "--shift-x", "shift_x", "flow pair shift in x");
  ctx.flags.add(synth, "--shift-y", "shift_y", "flow pair shift in y");
  ctx.flags.add(synth, "--stroke-width", "stroke_width", "mask stroke width in pixels");

  CLI::App* bench = app.add_subcommand("interp-bench", "compare the image interpolation methods");
  common(bench);
  bench->add_option("--input", input, "input image (PGM or PNG)");
  ctx.flags.add(bench, "--counts", "counts", "comma-separated vertex counts per dimension");
  ctx.flags.add(bench, "--methods", "methods", "comma-separated methods");

  CLI::App* inp = app.add_subcommand("inpaint", "adaptive TV inpainting");
  common(inp);
  inp->add_option("--input", input, "corrupted image");
  inp->add_option("--mask", mask, "mask image: 0 = inpaint, 255 = keep");
  inp->add_option("--reference", reference, "clean image for PSNR/SSIM");
  ctx.flags.add(inp, "--n-coarsen", "n_coarsen", "initial mesh coarsening level");
  ctx.flags.add(inp, "--theta-mark", "theta_mark", "Dorfler parameter");
  ctx.flags.add(inp, "--indicator", "indicator", "{residual|primal-dual}");
  ctx.flags.add(inp, "--interp", "interp", "{nodal|l2-lagrange|qi-lagrange|l2-pixel}");
  add_model_flags(inp, ctx.flags);
  add_common_flags(inp, ctx.flags);

  CLI::App* flow = app.add_subcommand("optflow", "optical flow with adaptive warping");
  common(flow);
  flow->add_option("--frame0", frame0, "first frame");
  flow->add_option("--frame1", frame1, "second frame");
  flow->add_option("--gt-flow", gt_flow, "ground-truth flow (.flo)");
  ctx.flags.add(flow, "--theta-mark", "theta_mark", "Dorfler parameter");
  ctx.flags.add(flow, "--indicator", "indicator", "{residual|primal-dual}");
  ctx.flags.add(flow, "--interp", "interp", "projection of warped images");
  ctx.flags.add(flow, "--eps-warp", "eps_warp", "relative improvement below which the mesh is refined");
  ctx.flags.add(flow, "--total-refinements", "total_refinements", "number of refinements");
  ctx.flags.add(flow, "--max-warps", "max_warps", "warp iteration cap");
  add_model_flags(flow, ctx.flags);
  add_common_flags(flow, ctx.flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitBadInput;
  }

  int rc = kExitOk;
  try {
    if (synth->parsed()) {
      ctx.command = "synth";
      rc = run_synth(ctx);
    } else if (bench->parsed()) {
      ctx.command = "interp-bench";
      rc = run_interp_bench(ctx, input);
    } else if (inp->parsed()) {
      ctx.command = "inpaint";
      rc = run_inpaint(ctx, input, mask, reference);
    } else {
      ctx.command = "optflow";
      rc = run_optflow(ctx, frame0, frame1, gt_flow);
    }
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    rc = kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    rc = kExitBadInput;
  }
  if (rc == kExitNotConverged) std::cerr << "warning: solver did not converge; best iterate written\n";
  ctx.write_manifest(rc);
  return rc;
}
