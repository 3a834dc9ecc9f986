#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "muffin/cube.hpp"

namespace muffin {

/// Scaling (lowpass) filter of the orthonormal Daubechies wavelet with
/// `order` vanishing moments, order 1 (Haar) through 8. Length 2 * order,
/// normalized to sum sqrt(2).
std::span<const double> daubechies_filter(int order);

/// Periodic orthonormal 2-D wavelet transform with one Daubechies filter.
/// Coefficients use the usual Mallat layout in a plane the size of the
/// image.
class WaveletBasis {
 public:
  WaveletBasis(Grid grid, int order, int depth);

  Grid grid() const noexcept { return grid_; }
  int order() const noexcept { return order_; }
  int depth() const noexcept { return depth_; }

  void analyze(std::span<const double> image, std::span<double> coeffs) const;
  void synthesize(std::span<const double> coeffs,
                  std::span<double> image) const;

 private:
  Grid grid_;
  int order_;
  int depth_;
  std::vector<double> lowpass_;
  std::vector<double> highpass_;
};

/// Spatial analysis operator W_s: a stack of orthonormal wavelet bases, so
/// W_s^T W_s = B * I and ||W_s||^2 = B.
class SpatialAnalysis {
 public:
  /// Daubechies db1..db8 at the default depth.
  explicit SpatialAnalysis(Grid grid);
  SpatialAnalysis(Grid grid, std::vector<int> orders, int depth);

  /// max(1, log2(min(width, height)) - 2).
  static int default_depth(Grid grid);

  Grid grid() const noexcept { return grid_; }
  std::size_t basis_count() const noexcept { return bases_.size(); }
  int depth() const noexcept { return depth_; }
  const std::vector<int>& orders() const noexcept { return orders_; }
  double norm_squared() const noexcept {
    return static_cast<double>(bases_.size());
  }

  /// `coeffs` holds basis_count() planes, basis b at offset b * N.
  void analyze(std::span<const double> image, std::span<double> coeffs) const;
  /// Sum over bases of each basis' synthesis.
  void adjoint(std::span<const double> coeffs, std::span<double> image) const;

  std::vector<double> analyze(std::span<const double> image) const;
  Plane adjoint(std::span<const double> coeffs) const;

 private:
  Grid grid_;
  int depth_;
  std::vector<int> orders_;
  std::vector<WaveletBasis> bases_;
};

/// Spectral analysis operator W_l: orthonormal DCT-II along the band axis,
/// applied independently at every pixel.
class SpectralAnalysis {
 public:
  explicit SpectralAnalysis(std::size_t length);

  std::size_t length() const noexcept { return length_; }
  double norm_squared() const noexcept { return 1.0; }

  /// Row-major L x L transform matrix C, coefficients = C * spectrum.
  const std::vector<double>& matrix() const noexcept { return matrix_; }

  std::vector<double> analyze(std::span<const double> spectrum) const;
  std::vector<double> adjoint(std::span<const double> coeffs) const;

  /// Cube forms over the pixel range [begin, end). `in` and `out` are
  /// plane-major with `pixels` entries per plane and length() planes; only
  /// the given pixels are written.
  void analyze_pixels(std::span<const double> in, std::span<double> out,
                      std::size_t pixels, std::size_t begin,
                      std::size_t end) const;
  void adjoint_pixels(std::span<const double> in, std::span<double> out,
                      std::size_t pixels, std::size_t begin,
                      std::size_t end) const;

 private:
  void Multiply(std::span<const double> in, std::span<double> out,
                std::size_t pixels, std::size_t begin, std::size_t end,
                bool transpose) const;

  std::size_t length_;
  std::vector<double> matrix_;
};

}  // namespace muffin
