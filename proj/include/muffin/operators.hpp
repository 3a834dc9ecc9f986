#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "muffin/cube.hpp"

namespace muffin {

class FftPlan;

/// Circular convolution by one band's PSF, and its adjoint (circular
/// correlation). The PSF origin is pixel 0; the plane is periodic.
///
/// Immutable after construction; apply/adjoint may be called concurrently.
class BandOperator {
 public:
  BandOperator(Grid grid, std::span<const double> psf);

  Grid grid() const noexcept { return grid_; }
  std::span<const double> psf() const noexcept { return psf_; }

  /// ||H||^2, the largest squared magnitude of the transfer function. Exact
  /// for circular convolution.
  double norm_squared() const noexcept { return norm_squared_; }

  void apply(std::span<const double> in, std::span<double> out) const;
  void adjoint(std::span<const double> in, std::span<double> out) const;
  Plane apply(std::span<const double> in) const;
  Plane adjoint(std::span<const double> in) const;

  /// H^T (H x - y), the gradient of 0.5 ||y - H x||^2.
  Plane gradient(std::span<const double> x, std::span<const double> y) const;

 private:
  void Filter(std::span<const double> in, std::span<double> out,
              bool conjugate) const;
  void CheckSize(std::size_t size, const char* what) const;

  Grid grid_;
  std::vector<double> psf_;
  std::vector<std::complex<double>> transfer_;
  double norm_squared_ = 0.0;
  std::shared_ptr<const FftPlan> plan_;
};

/// One BandOperator per band, all on the same grid.
class PsfSet {
 public:
  PsfSet() = default;
  explicit PsfSet(const ImageCube& psf_cube);

  std::size_t bands() const noexcept { return operators_.size(); }
  Grid grid() const noexcept { return grid_; }
  const BandOperator& operator[](std::size_t band) const {
    return operators_[band];
  }
  /// beta = max_l ||H_l||^2.
  double max_norm_squared() const noexcept;

  /// Convolves every plane of `sky` with its band's PSF.
  ImageCube apply(const ImageCube& sky) const;

 private:
  Grid grid_;
  std::vector<BandOperator> operators_;
};

}  // namespace muffin
