#pragma once

#include <complex>
#include <memory>
#include <span>

#include "muffin/cube.hpp"

namespace muffin {

/// Real-to-complex 2-D FFT pair for one grid size. Plans are created once
/// (FFTW planning is not thread-safe) and executed on per-call aligned
/// buffers, so the same plan can run from several workers at once.
class FftPlan {
 public:
  explicit FftPlan(Grid grid);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  /// Number of complex bins in the half spectrum: height * (width / 2 + 1).
  std::size_t spectrum_size() const noexcept { return spectrum_size_; }
  Grid grid() const noexcept { return grid_; }

  /// Unnormalized forward transform.
  void forward(std::span<const double> in,
               std::span<std::complex<double>> out) const;
  /// Unnormalized inverse transform (the result is scaled by N).
  void inverse(std::span<const std::complex<double>> in,
               std::span<double> out) const;

  /// Shared plan per grid size.
  static std::shared_ptr<const FftPlan> For(Grid grid);

 private:
  Grid grid_;
  std::size_t spectrum_size_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace muffin
