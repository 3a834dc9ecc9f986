#include "muffin/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "muffin/cube.hpp"

namespace muffin {

namespace {

// 3x5 glyphs, one row per entry, bit 2 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 5>, 13> kGlyphs{{
    {7, 5, 5, 5, 7},  // 0
    {2, 6, 2, 2, 7},  // 1
    {7, 1, 7, 4, 7},  // 2
    {7, 1, 7, 1, 7},  // 3
    {5, 5, 7, 1, 1},  // 4
    {7, 4, 7, 1, 7},  // 5
    {7, 4, 7, 5, 7},  // 6
    {7, 1, 1, 1, 1},  // 7
    {7, 5, 7, 5, 7},  // 8
    {7, 5, 7, 1, 7},  // 9
    {0, 0, 7, 0, 0},  // -
    {0, 0, 0, 0, 2},  // .
    {7, 4, 7, 4, 7},  // e
}};

class Canvas {
 public:
  Canvas(unsigned width, unsigned height)
      : width_(width), height_(height), pixels_(3ull * width * height, 255) {}

  void Set(long x, long y, std::uint32_t rgb) {
    if (x < 0 || y < 0 || x >= long(width_) || y >= long(height_)) return;
    auto* p = &pixels_[3 * (std::size_t(y) * width_ + std::size_t(x))];
    p[0] = (rgb >> 16) & 0xff;
    p[1] = (rgb >> 8) & 0xff;
    p[2] = rgb & 0xff;
  }

  void Line(double x0, double y0, double x1, double y1, std::uint32_t rgb) {
    const double steps =
        std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1.0});
    for (int i = 0; i <= int(steps); ++i) {
      const double t = i / steps;
      const long x = std::lround(x0 + t * (x1 - x0));
      const long y = std::lround(y0 + t * (y1 - y0));
      Set(x, y, rgb);
      Set(x, y + 1, rgb);
    }
  }

  // Draws text with 2x scaled glyphs; returns the pixel width.
  void Text(long x, long y, const std::string& text) {
    for (char ch : text) {
      int index = -1;
      if (ch >= '0' && ch <= '9') index = ch - '0';
      if (ch == '-') index = 10;
      if (ch == '.') index = 11;
      if (ch == 'e') index = 12;
      if (index >= 0) {
        for (int row = 0; row < 5; ++row) {
          for (int col = 0; col < 3; ++col) {
            if (!(kGlyphs[index][row] & (4 >> col))) continue;
            for (int k = 0; k < 4; ++k) {
              Set(x + 2 * col + k % 2, y + 2 * row + k / 2, 0x202020);
            }
          }
        }
      }
      x += 8;
    }
  }

  void Save(const std::filesystem::path& path) const {
    std::unique_ptr<FILE, int (*)(FILE*)> file(
        std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!file) throw CubeError(CubeErrc::kIo, "cannot write " + path.string());
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw CubeError(CubeErrc::kIo, "PNG encoding failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width_, height_, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (unsigned y = 0; y < height_; ++y) {
      png_write_row(png, const_cast<png_bytep>(&pixels_[3ull * y * width_]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }

 private:
  unsigned width_, height_;
  std::vector<std::uint8_t> pixels_;
};

std::string Label(double value) {
  char buffer[32];
  if (value != 0.0 && (std::abs(value) >= 1e5 || std::abs(value) < 1e-2)) {
    std::snprintf(buffer, sizeof buffer, "%.1e", value);
  } else {
    std::snprintf(buffer, sizeof buffer, "%.4g", value);
  }
  return buffer;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path,
                     const std::vector<Series>& series,
                     const PlotOptions& options) {
  const double inf = std::numeric_limits<double>::infinity();
  double xmin = inf, xmax = -inf, ymin = inf, ymax = -inf;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!(xmin <= xmax)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  Canvas canvas(options.width, options.height);
  const double left = 80, right = options.width - 20.0;
  const double top = 20, bottom = options.height - 40.0;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto py = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  canvas.Line(left, top, left, bottom, 0x000000);
  canvas.Line(left, bottom, right, bottom, 0x000000);
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + k * (xmax - xmin) / 4;
    const double fy = ymin + k * (ymax - ymin) / 4;
    canvas.Line(px(fx), bottom, px(fx), bottom + 5, 0x000000);
    canvas.Line(left - 5, py(fy), left, py(fy), 0x000000);
    canvas.Text(long(px(fx)) - 12, long(bottom) + 12, Label(fx));
    canvas.Text(4, long(py(fy)) - 5, Label(fy));
  }

  for (const auto& s : series) {
    bool have_previous = false;
    double x0 = 0, y0 = 0;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        have_previous = false;
        continue;
      }
      const double x1 = px(s.x[i]), y1 = py(s.y[i]);
      if (have_previous) canvas.Line(x0, y0, x1, y1, s.rgb);
      x0 = x1;
      y0 = y1;
      have_previous = true;
    }
  }
  canvas.Save(path);
}

}  // namespace muffin
