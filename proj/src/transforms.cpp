#include "muffin/transforms.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "muffin/error.hpp"

namespace muffin {

namespace {

// One level of the periodic two-channel filter bank on a strided signal of
// even length n: first half of `out` gets the approximation, second half the
// detail.
void AnalyzeLine(const double* in, std::size_t stride, std::size_t n,
                 const std::vector<double>& lo, const std::vector<double>& hi,
                 std::vector<double>& ext, double* out, std::size_t out_stride) {
  const std::size_t taps = lo.size();
  ext.resize(n + taps);
  for (std::size_t j = 0; j < n + taps; ++j) ext[j] = in[(j % n) * stride];
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double* window = ext.data() + 2 * i;
    double a = 0.0, d = 0.0;
    for (std::size_t k = 0; k < taps; ++k) {
      a += lo[k] * window[k];
      d += hi[k] * window[k];
    }
    out[i * out_stride] = a;
    out[(half + i) * out_stride] = d;
  }
}

// Transpose of AnalyzeLine.
void SynthesizeLine(const double* in, std::size_t stride, std::size_t n,
                    const std::vector<double>& lo,
                    const std::vector<double>& hi, std::vector<double>& acc,
                    double* out, std::size_t out_stride) {
  const std::size_t taps = lo.size();
  acc.assign(n + taps, 0.0);
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double a = in[i * stride];
    const double d = in[(half + i) * stride];
    double* window = acc.data() + 2 * i;
    for (std::size_t k = 0; k < taps; ++k) {
      window[k] += lo[k] * a + hi[k] * d;
    }
  }
  for (std::size_t j = 0; j < n; ++j) out[j * out_stride] = 0.0;
  for (std::size_t j = 0; j < n + taps; ++j) {
    out[(j % n) * out_stride] += acc[j];
  }
}

bool IsPowerOfTwo(std::size_t v) { return v != 0 && std::has_single_bit(v); }

}  // namespace

WaveletBasis::WaveletBasis(Grid grid, int order, int depth)
    : grid_(grid), order_(order), depth_(depth) {
  if (!IsPowerOfTwo(grid.width) || !IsPowerOfTwo(grid.height)) {
    throw DimensionError("wavelet transforms need power-of-two dimensions, got " +
                         std::to_string(grid.width) + "x" +
                         std::to_string(grid.height));
  }
  if (depth < 1 || (grid.width >> depth) == 0 || (grid.height >> depth) == 0) {
    throw DimensionError("wavelet depth " + std::to_string(depth) +
                         " too large for " + std::to_string(grid.width) + "x" +
                         std::to_string(grid.height));
  }
  const auto filter = daubechies_filter(order);
  lowpass_.assign(filter.begin(), filter.end());
  const std::size_t taps = lowpass_.size();
  highpass_.resize(taps);
  for (std::size_t k = 0; k < taps; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    highpass_[k] = sign * lowpass_[taps - 1 - k];
  }
}

void WaveletBasis::analyze(std::span<const double> image,
                           std::span<double> coeffs) const {
  const std::size_t width = grid_.width;
  std::copy(image.begin(), image.end(), coeffs.begin());
  std::vector<double> ext, line;
  for (int level = 0; level < depth_; ++level) {
    const std::size_t w = width >> level;
    const std::size_t h = grid_.height >> level;
    line.resize(std::max(w, h));
    for (std::size_t r = 0; r < h; ++r) {
      double* row = coeffs.data() + r * width;
      AnalyzeLine(row, 1, w, lowpass_, highpass_, ext, line.data(), 1);
      std::copy(line.begin(), line.begin() + w, row);
    }
    for (std::size_t c = 0; c < w; ++c) {
      double* col = coeffs.data() + c;
      AnalyzeLine(col, width, h, lowpass_, highpass_, ext, line.data(), 1);
      for (std::size_t r = 0; r < h; ++r) col[r * width] = line[r];
    }
  }
}

void WaveletBasis::synthesize(std::span<const double> coeffs,
                              std::span<double> image) const {
  const std::size_t width = grid_.width;
  std::copy(coeffs.begin(), coeffs.end(), image.begin());
  std::vector<double> acc, line;
  for (int level = depth_ - 1; level >= 0; --level) {
    const std::size_t w = width >> level;
    const std::size_t h = grid_.height >> level;
    line.resize(std::max(w, h));
    for (std::size_t c = 0; c < w; ++c) {
      double* col = image.data() + c;
      SynthesizeLine(col, width, h, lowpass_, highpass_, acc, line.data(), 1);
      for (std::size_t r = 0; r < h; ++r) col[r * width] = line[r];
    }
    for (std::size_t r = 0; r < h; ++r) {
      double* row = image.data() + r * width;
      SynthesizeLine(row, 1, w, lowpass_, highpass_, acc, line.data(), 1);
      std::copy(line.begin(), line.begin() + w, row);
    }
  }
}

SpatialAnalysis::SpatialAnalysis(Grid grid)
    : SpatialAnalysis(grid, {1, 2, 3, 4, 5, 6, 7, 8}, default_depth(grid)) {}

SpatialAnalysis::SpatialAnalysis(Grid grid, std::vector<int> orders, int depth)
    : grid_(grid), depth_(depth), orders_(std::move(orders)) {
  if (orders_.empty()) throw ConfigError("need at least one wavelet basis");
  bases_.reserve(orders_.size());
  for (int order : orders_) bases_.emplace_back(grid, order, depth);
}

int SpatialAnalysis::default_depth(Grid grid) {
  const std::size_t side = std::min(grid.width, grid.height);
  const int log2 = side == 0 ? 0 : std::bit_width(side) - 1;
  return std::max(1, log2 - 2);
}

void SpatialAnalysis::analyze(std::span<const double> image,
                              std::span<double> coeffs) const {
  const std::size_t n = grid_.pixels();
  if (image.size() != n || coeffs.size() != n * bases_.size()) {
    throw DimensionError("spatial analysis: shape mismatch");
  }
  for (std::size_t b = 0; b < bases_.size(); ++b) {
    bases_[b].analyze(image, coeffs.subspan(b * n, n));
  }
}

void SpatialAnalysis::adjoint(std::span<const double> coeffs,
                              std::span<double> image) const {
  const std::size_t n = grid_.pixels();
  if (image.size() != n || coeffs.size() != n * bases_.size()) {
    throw DimensionError("spatial adjoint: shape mismatch");
  }
  std::fill(image.begin(), image.end(), 0.0);
  Plane part(n);
  for (std::size_t b = 0; b < bases_.size(); ++b) {
    bases_[b].synthesize(coeffs.subspan(b * n, n), part);
    for (std::size_t i = 0; i < n; ++i) image[i] += part[i];
  }
}

std::vector<double> SpatialAnalysis::analyze(
    std::span<const double> image) const {
  std::vector<double> coeffs(grid_.pixels() * bases_.size());
  analyze(image, coeffs);
  return coeffs;
}

Plane SpatialAnalysis::adjoint(std::span<const double> coeffs) const {
  Plane image(grid_.pixels());
  adjoint(coeffs, image);
  return image;
}

SpectralAnalysis::SpectralAnalysis(std::size_t length)
    : length_(length), matrix_(length * length) {
  if (length == 0) throw ConfigError("spectral transform length must be > 0");
  const double len = static_cast<double>(length);
  for (std::size_t k = 0; k < length; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / len);
    for (std::size_t l = 0; l < length; ++l) {
      matrix_[k * length + l] =
          scale * std::cos(std::numbers::pi * (2.0 * l + 1.0) * k / (2.0 * len));
    }
  }
}

std::vector<double> SpectralAnalysis::analyze(
    std::span<const double> spectrum) const {
  if (spectrum.size() != length_) {
    throw DimensionError("spectral analysis: expected length " +
                         std::to_string(length_));
  }
  std::vector<double> out(length_);
  Multiply(spectrum, out, 1, 0, 1, false);
  return out;
}

std::vector<double> SpectralAnalysis::adjoint(
    std::span<const double> coeffs) const {
  if (coeffs.size() != length_) {
    throw DimensionError("spectral adjoint: expected length " +
                         std::to_string(length_));
  }
  std::vector<double> out(length_);
  Multiply(coeffs, out, 1, 0, 1, true);
  return out;
}

void SpectralAnalysis::analyze_pixels(std::span<const double> in,
                                      std::span<double> out,
                                      std::size_t pixels, std::size_t begin,
                                      std::size_t end) const {
  Multiply(in, out, pixels, begin, end, false);
}

void SpectralAnalysis::adjoint_pixels(std::span<const double> in,
                                      std::span<double> out,
                                      std::size_t pixels, std::size_t begin,
                                      std::size_t end) const {
  Multiply(in, out, pixels, begin, end, true);
}

void SpectralAnalysis::Multiply(std::span<const double> in,
                                std::span<double> out, std::size_t pixels,
                                std::size_t begin, std::size_t end,
                                bool transpose) const {
  if (in.size() != pixels * length_ || out.size() != pixels * length_ ||
      end > pixels || begin > end) {
    throw DimensionError("spectral transform: shape mismatch");
  }
  for (std::size_t k = 0; k < length_; ++k) {
    double* dst = out.data() + k * pixels;
    std::fill(dst + begin, dst + end, 0.0);
    for (std::size_t l = 0; l < length_; ++l) {
      const double c =
          transpose ? matrix_[l * length_ + k] : matrix_[k * length_ + l];
      const double* src = in.data() + l * pixels;
      for (std::size_t n = begin; n < end; ++n) dst[n] += c * src[n];
    }
  }
}

}  // namespace muffin
