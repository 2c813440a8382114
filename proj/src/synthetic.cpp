#include "tvafem/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tvafem {

namespace {

constexpr double kFrame = 64.0;

void check_size(int n1, int n2) {
  if (n1 < 2 || n2 < 2) throw std::invalid_argument("synthetic: size must be at least 2 x 2");
}

double texture(double x, double y) {
  constexpr double tau = 2.0 * std::numbers::pi;
  return 0.5 + 0.2 * std::sin(tau * x / 23.0) * std::cos(tau * y / 19.0) + 0.15 * std::sin(tau * (x + y) / 31.0);
}

}  // namespace

ImageGrid synthetic_image(int n1, int n2) {
  check_size(n1, n2);
  ImageGrid img(n1, n2);
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      const double x = (i + 1) * kFrame / n1, y = (j + 1) * kFrame / n2;
      double v = 0.35 + 0.1 * std::sin(x / 7.0) * std::cos(y / 9.0);
      const double r = std::hypot(x - 24.0, y - 30.0);
      v += 0.2 * (1.0 - std::tanh(r - 12.0));
      const double sq = std::max(std::abs(x - 48.0) - 8.0, std::abs(y - 45.0) - 9.0);
      v += 0.125 * (1.0 - std::tanh(sq));
      img(i, j) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

std::vector<bool> synthetic_stroke_mask(int n1, int n2, double width) {
  check_size(n1, n2);
  if (!(width > 0.0)) throw std::invalid_argument("synthetic: stroke width must be positive");
  std::vector<bool> keep(static_cast<std::size_t>(n1) * n2, true);
  const double hx = 0.5 * width * kFrame / n1, hy = 0.5 * width * kFrame / n2;
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      const double x = (i + 1) * kFrame / n1, y = (j + 1) * kFrame / n2;
      bool hit = false;
      for (double c : {12.0, 32.0, 52.0}) hit = hit || std::abs(x - c) < hx;
      for (double c : {20.0, 44.0}) hit = hit || std::abs(y - c) < hy;
      if (hit) keep[static_cast<std::size_t>(j) * n1 + i] = false;
    }
  }
  return keep;
}

ImageGrid apply_mask(const ImageGrid& image, const std::vector<bool>& keep) {
  if (keep.size() != image.size()) throw std::invalid_argument("apply_mask: size mismatch");
  ImageGrid out = image;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (!keep[k]) out.values[k] = 0.0;
  }
  return out;
}

FlowPair synthetic_flow_pair(int n1, int n2, double shift_x, double shift_y) {
  check_size(n1, n2);
  FlowPair out{ImageGrid(n1, n2), ImageGrid(n1, n2), FlowRaster(n1, n2, shift_x, shift_y)};
  for (int j = 0; j < n2; ++j) {
    for (int i = 0; i < n1; ++i) {
      out.f0(i, j) = texture(i + 1.0, j + 1.0);
      out.f1(i, j) = texture(i + 1.0 - shift_x, j + 1.0 - shift_y);
    }
  }
  return out;
}

}  // namespace tvafem
