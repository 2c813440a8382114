#include "tvafem/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tvafem {

ImageGrid::ImageGrid(int width, int height, double fill) : n1(width), n2(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image: non-positive dimension");
  values.assign(static_cast<std::size_t>(width) * height, fill);
}

double sample_bilinear(const ImageGrid& img, Point p) {
  const double x = std::clamp(p.x, 1.0, static_cast<double>(img.n1)) - 1.0;
  const double y = std::clamp(p.y, 1.0, static_cast<double>(img.n2)) - 1.0;
  const int i0 = std::min(static_cast<int>(std::floor(x)), std::max(img.n1 - 2, 0));
  const int j0 = std::min(static_cast<int>(std::floor(y)), std::max(img.n2 - 2, 0));
  const int i1 = std::min(i0 + 1, img.n1 - 1);
  const int j1 = std::min(j0 + 1, img.n2 - 1);
  const double tx = x - i0, ty = y - j0;
  return (1 - tx) * (1 - ty) * img(i0, j0) + tx * (1 - ty) * img(i1, j0) +
         (1 - tx) * ty * img(i0, j1) + tx * ty * img(i1, j1);
}

namespace {

double keys(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < 2.0) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return 0.0;
}

}  // namespace

double sample_bicubic(const ImageGrid& img, Point p) {
  const double x = p.x - 1.0;
  const double y = p.y - 1.0;
  const int ix = static_cast<int>(std::floor(x));
  const int iy = static_cast<int>(std::floor(y));
  const double fx = x - ix, fy = y - iy;
  std::array<double, 4> wx{}, wy{};
  for (int k = 0; k < 4; ++k) {
    wx[k] = keys(fx - (k - 1));
    wy[k] = keys(fy - (k - 1));
  }
  double sum = 0.0;
  for (int l = 0; l < 4; ++l) {
    if (wy[l] == 0.0) continue;
    const int j = std::clamp(iy + l - 1, 0, img.n2 - 1);
    double row = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (wx[k] == 0.0) continue;
      row += wx[k] * img(std::clamp(ix + k - 1, 0, img.n1 - 1), j);
    }
    sum += wy[l] * row;
  }
  return sum;
}

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

void skip_pnm_space(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  int v = -1;
  if (!(in >> v)) throw std::runtime_error("pgm: malformed header");
  return v;
}

ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P2") throw std::runtime_error("pgm: unsupported magic in " + path.string());
  const int w = read_pnm_int(in), h = read_pnm_int(in), maxval = read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw std::runtime_error("pgm: bad header");
  ImageGrid img(w, h);
  if (magic == "P2") {
    for (double& v : img.values) v = static_cast<double>(read_pnm_int(in)) / maxval;
    return img;
  }
  in.get();
  const bool wide = maxval > 255;
  std::vector<unsigned char> buf(img.size() * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!in) throw std::runtime_error("pgm: truncated data in " + path.string());
  for (std::size_t k = 0; k < img.size(); ++k) {
    const int raw = wide ? (buf[2 * k] << 8) | buf[2 * k + 1] : buf[k];
    img.values[k] = static_cast<double>(raw) / maxval;
  }
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

ImageGrid read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw std::runtime_error("png: out of memory");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png: decode error in " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> data(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (int j = 0; j < h; ++j) rows[j] = data.data() + j * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  ImageGrid img(w, h);
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      auto channel = [&](int c) -> double {
        const std::size_t k = static_cast<std::size_t>(i) * channels + c;
        if (depth == 16) {
          const auto* p = reinterpret_cast<const std::uint16_t*>(rows[j]);
          return p[k] / maxval;
        }
        return rows[j][k] / maxval;
      };
      img(i, j) = channels >= 3 ? 0.299 * channel(0) + 0.587 * channel(1) + 0.114 * channel(2)
                                : channel(0);
    }
  }
  return img;
}

void write_png_raw(const std::filesystem::path& path, int w, int h, int channels, int depth,
                   const std::vector<std::uint8_t>& bytes) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) throw std::runtime_error("png: out of memory");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png: encode error for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(w) * channels * (depth / 8);
  for (int j = 0; j < h; ++j) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + j * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageGrid read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
  throw std::runtime_error("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const ImageGrid& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("image: bit depth must be 8 or 16");
  const int maxval = bit_depth == 16 ? 65535 : 255;
  const int bpp = bit_depth / 8;
  std::vector<std::uint8_t> bytes(img.size() * bpp);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const int q = static_cast<int>(std::lround(std::clamp(img.values[k], 0.0, 1.0) * maxval));
    if (bpp == 2) {
      bytes[2 * k] = static_cast<std::uint8_t>(q >> 8);
      bytes[2 * k + 1] = static_cast<std::uint8_t>(q & 0xff);
    } else {
      bytes[k] = static_cast<std::uint8_t>(q);
    }
  }
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_png_raw(path, img.n1, img.n2, 1, bit_depth, bytes);
    return;
  }
  if (ext != ".pgm") throw std::runtime_error("unsupported image format: " + path.string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << img.n1 << ' ' << img.n2 << '\n' << maxval << '\n';
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  if (img.rgb.size() != static_cast<std::size_t>(img.n1) * img.n2 * 3) {
    throw std::invalid_argument("rgb image: buffer size mismatch");
  }
  write_png_raw(path, img.n1, img.n2, 3, 8, img.rgb);
}

std::vector<bool> read_mask(const std::filesystem::path& path, int* n1, int* n2) {
  const ImageGrid m = read_image(path);
  if (n1) *n1 = m.n1;
  if (n2) *n2 = m.n2;
  std::vector<bool> keep(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) keep[k] = m.values[k] >= 0.5;
  return keep;
}

}  // namespace tvafem
