#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tvafem/mesh.hpp"

namespace tvafem {

/// Raster of intensities. Pixel (i, j), 0-based, sits at the point
/// (i + 1, j + 1) of the image domain [1, n1] x [1, n2]; storage is row-major
/// with i running fastest.
struct ImageGrid {
  int n1 = 0;
  int n2 = 0;
  std::vector<double> values;

  ImageGrid() = default;
  ImageGrid(int width, int height, double fill = 0.0);

  [[nodiscard]] double& operator()(int i, int j) { return values[static_cast<std::size_t>(j) * n1 + i]; }
  [[nodiscard]] double operator()(int i, int j) const {
    return values[static_cast<std::size_t>(j) * n1 + i];
  }
  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] bool same_shape(const ImageGrid& o) const { return n1 == o.n1 && n2 == o.n2; }
};

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  int n1 = 0;
  int n2 = 0;
  std::vector<std::uint8_t> rgb;
};

/// Bilinear interpolant of the pixel values, constant outside the domain.
double sample_bilinear(const ImageGrid& img, Point p);
/// Keys cubic convolution (a = -0.5) with constant extension.
double sample_bicubic(const ImageGrid& img, Point p);

/// Reads PGM (P2/P5, 8 or 16 bit) or PNG (gray or color, 8 or 16 bit; color is
/// converted to luma). Values are mapped linearly to [0, 1].
ImageGrid read_image(const std::filesystem::path& path);
/// Writes by extension (.pgm or .png). Values are clamped to [0, 1].
void write_image(const std::filesystem::path& path, const ImageGrid& img, int bit_depth = 8);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);

/// Reads a mask image: pixels with value >= 0.5 are kept, darker pixels belong
/// to the inpainting domain. Returns one flag per pixel, true = keep.
std::vector<bool> read_mask(const std::filesystem::path& path, int* n1 = nullptr, int* n2 = nullptr);

}  // namespace tvafem
