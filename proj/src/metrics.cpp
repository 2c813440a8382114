#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tvafem/apps.hpp"

namespace tvafem {

double psnr(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b) || a.size() == 0) throw std::invalid_argument("psnr: image size mismatch");
  // Neumaier summation keeps the mean exact for constant differences.
  double sum = 0.0, comp = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.values[k] - b.values[k];
    const double term = d * d;
    const double t = sum + term;
    comp += std::abs(sum) >= term ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  const double mse = (sum + comp) / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double ssim(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b) || a.size() == 0) throw std::invalid_argument("ssim: image size mismatch");
  int w = std::min({11, a.n1, a.n2});
  if (w % 2 == 0) --w;
  const double sigma = 1.5;
  const int r = w / 2;
  std::vector<double> kernel(static_cast<std::size_t>(w) * w);
  double ksum = 0.0;
  for (int j = 0; j < w; ++j) {
    for (int i = 0; i < w; ++i) {
      const double dx = i - r, dy = j - r;
      kernel[j * w + i] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      ksum += kernel[j * w + i];
    }
  }
  for (double& k : kernel) k /= ksum;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double total = 0.0;
  std::size_t count = 0;
  for (int j0 = 0; j0 + w <= a.n2; ++j0) {
    for (int i0 = 0; i0 + w <= a.n1; ++i0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int j = 0; j < w; ++j) {
        for (int i = 0; i < w; ++i) {
          const double k = kernel[j * w + i];
          const double x = a(i0 + i, j0 + j), y = b(i0 + i, j0 + j);
          ma += k * x;
          mb += k * y;
          saa += k * x * x;
          sbb += k * y * y;
          sab += k * x * y;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

FlowRaster::FlowRaster(int width, int height, double fu, double fv) : n1(width), n2(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("flow: non-positive dimension");
  u.assign(static_cast<std::size_t>(width) * height, fu);
  v.assign(static_cast<std::size_t>(width) * height, fv);
}

bool flow_valid(double u, double v) {
  return std::isfinite(u) && std::isfinite(v) && std::abs(u) <= kUnknownFlow && std::abs(v) <= kUnknownFlow;
}

FlowErrors flow_errors(const FlowRaster& est, const FlowRaster& gt, const std::vector<bool>* valid) {
  if (est.n1 != gt.n1 || est.n2 != gt.n2) throw std::invalid_argument("flow_errors: size mismatch");
  if (valid && valid->size() != gt.size()) throw std::invalid_argument("flow_errors: mask size mismatch");
  std::vector<double> ee, ae;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    if (!flow_valid(gt.u[k], gt.v[k]) || (valid && !(*valid)[k])) continue;
    const double du = est.u[k] - gt.u[k], dv = est.v[k] - gt.v[k];
    ee.push_back(std::sqrt(du * du + dv * dv));
    const double dot = est.u[k] * gt.u[k] + est.v[k] * gt.v[k] + 1.0;
    const double n = std::sqrt((est.u[k] * est.u[k] + est.v[k] * est.v[k] + 1.0) *
                               (gt.u[k] * gt.u[k] + gt.v[k] * gt.v[k] + 1.0));
    ae.push_back(std::acos(std::clamp(dot / n, -1.0, 1.0)));
  }
  if (ee.empty()) throw std::invalid_argument("flow_errors: no valid pixels");
  auto stats = [](const std::vector<double>& x, double& mean, double& sd) {
    double s = 0.0;
    for (double e : x) s += e;
    mean = s / static_cast<double>(x.size());
    double q = 0.0;
    for (double e : x) q += (e - mean) * (e - mean);
    sd = std::sqrt(q / static_cast<double>(x.size()));
  };
  FlowErrors out;
  stats(ee, out.ee_mean, out.ee_std);
  stats(ae, out.ae_mean, out.ae_std);
  out.count = ee.size();
  return out;
}

namespace {

std::vector<std::array<double, 3>> color_wheel() {
  constexpr int ry = 15, yg = 6, gc = 4, cb = 11, bm = 13, mr = 6;
  std::vector<std::array<double, 3>> w;
  for (int i = 0; i < ry; ++i) w.push_back({255, std::floor(255.0 * i / ry), 0});
  for (int i = 0; i < yg; ++i) w.push_back({255 - std::floor(255.0 * i / yg), 255, 0});
  for (int i = 0; i < gc; ++i) w.push_back({0, 255, std::floor(255.0 * i / gc)});
  for (int i = 0; i < cb; ++i) w.push_back({0, 255 - std::floor(255.0 * i / cb), 255});
  for (int i = 0; i < bm; ++i) w.push_back({std::floor(255.0 * i / bm), 0, 255});
  for (int i = 0; i < mr; ++i) w.push_back({255, 0, 255 - std::floor(255.0 * i / mr)});
  return w;
}

}  // namespace

RgbImage flow_to_color(const FlowRaster& flow, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("flow_to_color: max_norm must be positive");
  static const auto wheel = color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  RgbImage img{flow.n1, flow.n2, std::vector<std::uint8_t>(flow.size() * 3, 0)};
  for (std::size_t k = 0; k < flow.size(); ++k) {
    if (!flow_valid(flow.u[k], flow.v[k])) continue;
    const double fu = flow.u[k] / max_norm, fv = flow.v[k] / max_norm;
    const double rad = std::sqrt(fu * fu + fv * fv);
    const double a = std::atan2(-fv, -fu) / std::numbers::pi;
    const double fk = (a + 1.0) / 2.0 * (ncols - 1);
    const int k0 = static_cast<int>(std::floor(fk));
    const int k1 = (k0 + 1) % ncols;
    const double f = fk - k0;
    for (int ch = 0; ch < 3; ++ch) {
      double col = ((1 - f) * wheel[k0 % ncols][ch] + f * wheel[k1][ch]) / 255.0;
      col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
      img.rgb[3 * k + ch] = static_cast<std::uint8_t>(std::floor(255.0 * col));
    }
  }
  return img;
}

namespace {

constexpr float kFloTag = 202021.25f;

}  // namespace

FlowRaster read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char tag[4];
  std::int32_t w = 0, h = 0;
  in.read(tag, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::memcmp(tag, "PIEH", 4) != 0) throw std::runtime_error("flo: bad header in " + path.string());
  if (w <= 0 || h <= 0 || static_cast<long long>(w) * h > (1LL << 28)) {
    throw std::runtime_error("flo: bad dimensions in " + path.string());
  }
  FlowRaster f(w, h);
  std::vector<float> buf(static_cast<std::size_t>(w) * h * 2);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw std::runtime_error("flo: truncated data in " + path.string());
  for (std::size_t k = 0; k < f.size(); ++k) {
    f.u[k] = buf[2 * k];
    f.v[k] = buf[2 * k + 1];
  }
  return f;
}

void write_flo(const std::filesystem::path& path, const FlowRaster& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  static_assert(sizeof(float) == 4);
  float tag = kFloTag;
  out.write(reinterpret_cast<const char*>(&tag), 4);
  const std::int32_t w = flow.n1, h = flow.n2;
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> buf(flow.size() * 2);
  for (std::size_t k = 0; k < flow.size(); ++k) {
    buf[2 * k] = static_cast<float>(flow.u[k]);
    buf[2 * k + 1] = static_cast<float>(flow.v[k]);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

FlowRaster flow_raster(const FeVector& u, const PixelSampling& s) {
  if (u.m != 2) throw std::invalid_argument("flow_raster: expected two components");
  FlowRaster f(s.n1, s.n2);
  for (std::size_t k = 0; k < s.cell.size(); ++k) {
    if (s.cell[k] < 0) throw std::out_of_range("flow_raster: pixel outside mesh domain");
    const Cell& c = u.mesh->cell(s.cell[k]);
    for (int i = 0; i < 3; ++i) {
      f.u[k] += s.bary[k][i] * u.values[2 * c.v[i]];
      f.v[k] += s.bary[k][i] * u.values[2 * c.v[i] + 1];
    }
  }
  return f;
}

}  // namespace tvafem
