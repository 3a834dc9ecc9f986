#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "muffin/error.hpp"

namespace muffin {

/// Pixel grid shared by every plane of a reconstruction. Pixel n = row *
/// width + column.
struct Grid {
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t pixels() const noexcept { return width * height; }
  bool operator==(const Grid&) const = default;
};

/// A single image plane (or any flat per-pixel buffer).
using Plane = std::vector<double>;

/// Real-valued spectral cube. Band planes are stored one after the other:
/// element (pixel n, band l) lives at offset l * N + n.
class ImageCube {
 public:
  ImageCube() = default;
  /// Zero cube. An empty wavelength list defaults to 1, 2, ..., bands.
  ImageCube(Grid grid, std::size_t bands, std::vector<double> wavelengths = {});
  ImageCube(Grid grid, std::size_t bands, std::vector<double> data,
            std::vector<double> wavelengths);

  Grid grid() const noexcept { return grid_; }
  std::size_t width() const noexcept { return grid_.width; }
  std::size_t height() const noexcept { return grid_.height; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return grid_.pixels(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> plane(std::size_t band);
  std::span<const double> plane(std::size_t band) const;

  double& at(std::size_t pixel, std::size_t band) {
    return data_[band * pixels() + pixel];
  }
  double at(std::size_t pixel, std::size_t band) const {
    return data_[band * pixels() + pixel];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  const std::vector<double>& wavelengths() const noexcept {
    return wavelengths_;
  }

  bool all_finite() const noexcept;
  bool same_shape(const ImageCube& other) const noexcept {
    return grid_ == other.grid_ && bands_ == other.bands_;
  }

  bool operator==(const ImageCube&) const = default;

 private:
  Grid grid_;
  std::size_t bands_ = 0;
  std::vector<double> wavelengths_;
  std::vector<double> data_;
};

/// Stacked analysis coefficients: for each band, `basis_count` planes on the
/// image grid. Offset of (band l, basis b, pixel n) is (l * B + b) * N + n.
/// The spatial dual u uses B = number of wavelet bases; the spectral dual v
/// uses B = 1 with "band" indexing the cosine coefficient.
class CoefficientCube {
 public:
  CoefficientCube() = default;
  CoefficientCube(Grid grid, std::size_t basis_count, std::size_t bands);

  Grid grid() const noexcept { return grid_; }
  std::size_t basis_count() const noexcept { return basis_count_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t size() const noexcept { return data_.size(); }
  /// Number of coefficients belonging to one band.
  std::size_t band_size() const noexcept {
    return basis_count_ * grid_.pixels();
  }

  std::span<double> band(std::size_t l);
  std::span<const double> band(std::size_t l) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const CoefficientCube& other) const noexcept {
    return grid_ == other.grid_ && basis_count_ == other.basis_count_ &&
           bands_ == other.bands_;
  }

  bool operator==(const CoefficientCube&) const = default;

 private:
  Grid grid_;
  std::size_t basis_count_ = 0;
  std::size_t bands_ = 0;
  std::vector<double> data_;
};

/// Per-band noise variances sigma_l^2 of the dirty images.
struct NoiseModel {
  std::vector<double> variances;

  static NoiseModel uniform(std::size_t bands, double variance) {
    return NoiseModel{std::vector<double>(bands, variance)};
  }
  /// Throws ConfigError unless there is one strictly positive finite
  /// variance per band.
  void validate(std::size_t bands) const;
};

enum class CubeErrc {
  kIo,
  kMalformedHeader,
  kSizeMismatch,
  kNonFinite,
};

class CubeError : public Error {
 public:
  CubeError(CubeErrc code, const std::string& what)
      : Error(ErrorKind::kIo, what),
        code_(code) {}

  CubeErrc code() const noexcept { return code_; }

 private:
  CubeErrc code_;
};

/// Cube file: one JSON header line
///   {"w":W,"h":H,"l":L,"dtype":"f64le","wavelengths":[...]}\n
/// followed by W*H*L little-endian float64 values, band-plane major.
ImageCube cube_read(const std::filesystem::path& path);
void cube_write(const ImageCube& cube, const std::filesystem::path& path);

/// Header line (including the trailing newline) that cube_write emits.
std::string cube_header(const ImageCube& cube);

}  // namespace muffin
