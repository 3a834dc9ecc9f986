#include "muffin/operators.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include <fftw3.h>

#include "fft_plan.hpp"

namespace muffin {

namespace {

std::mutex& PlannerMutex() {
  static std::mutex mutex;
  return mutex;
}

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

FftwBuffer<double> AllocReal(std::size_t n) {
  return FftwBuffer<double>(fftw_alloc_real(n));
}

FftwBuffer<fftw_complex> AllocComplex(std::size_t n) {
  return FftwBuffer<fftw_complex>(fftw_alloc_complex(n));
}

}  // namespace

FftPlan::FftPlan(Grid grid)
    : grid_(grid), spectrum_size_(grid.height * (grid.width / 2 + 1)) {
  const int rows = static_cast<int>(grid.height);
  const int cols = static_cast<int>(grid.width);
  auto real = AllocReal(grid.pixels());
  auto spectrum = AllocComplex(spectrum_size_);
  std::lock_guard<std::mutex> lock(PlannerMutex());
  forward_plan_ = fftw_plan_dft_r2c_2d(rows, cols, real.get(), spectrum.get(),
                                       FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_2d(rows, cols, spectrum.get(), real.get(),
                                       FFTW_ESTIMATE);
}

FftPlan::~FftPlan() {
  std::lock_guard<std::mutex> lock(PlannerMutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void FftPlan::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) const {
  auto real = AllocReal(grid_.pixels());
  auto spectrum = AllocComplex(spectrum_size_);
  std::copy(in.begin(), in.end(), real.get());
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), real.get(),
                       spectrum.get());
  std::memcpy(static_cast<void*>(out.data()), spectrum.get(),
              spectrum_size_ * sizeof(fftw_complex));
}

void FftPlan::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) const {
  auto real = AllocReal(grid_.pixels());
  auto spectrum = AllocComplex(spectrum_size_);
  std::memcpy(spectrum.get(), in.data(),
              spectrum_size_ * sizeof(fftw_complex));
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), spectrum.get(),
                       real.get());
  std::copy(real.get(), real.get() + grid_.pixels(), out.begin());
}

std::shared_ptr<const FftPlan> FftPlan::For(Grid grid) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>,
                  std::weak_ptr<const FftPlan>>
      cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{grid.width, grid.height}];
  if (auto plan = slot.lock()) return plan;
  auto plan = std::make_shared<const FftPlan>(grid);
  slot = plan;
  return plan;
}

BandOperator::BandOperator(Grid grid, std::span<const double> psf)
    : grid_(grid), psf_(psf.begin(), psf.end()) {
  if (grid.width == 0 || grid.height == 0) {
    throw DimensionError("PSF grid must be non-empty");
  }
  CheckSize(psf.size(), "psf");
  plan_ = FftPlan::For(grid);
  transfer_.resize(plan_->spectrum_size());
  plan_->forward(psf_, transfer_);
  for (const auto& c : transfer_) {
    norm_squared_ = std::max(norm_squared_, std::norm(c));
  }
}

void BandOperator::CheckSize(std::size_t size, const char* what) const {
  if (size != grid_.pixels()) {
    throw DimensionError(std::string(what) + " has " + std::to_string(size) +
                         " pixels, operator grid has " +
                         std::to_string(grid_.pixels()));
  }
}

void BandOperator::Filter(std::span<const double> in, std::span<double> out,
                          bool conjugate) const {
  CheckSize(in.size(), "input");
  CheckSize(out.size(), "output");
  std::vector<std::complex<double>> spectrum(transfer_.size());
  plan_->forward(in, spectrum);
  if (conjugate) {
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      spectrum[k] *= std::conj(transfer_[k]);
    }
  } else {
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      spectrum[k] *= transfer_[k];
    }
  }
  plan_->inverse(spectrum, out);
  const double scale = 1.0 / static_cast<double>(grid_.pixels());
  for (double& v : out) v *= scale;
}

void BandOperator::apply(std::span<const double> in,
                         std::span<double> out) const {
  Filter(in, out, false);
}

void BandOperator::adjoint(std::span<const double> in,
                           std::span<double> out) const {
  Filter(in, out, true);
}

Plane BandOperator::apply(std::span<const double> in) const {
  Plane out(grid_.pixels());
  apply(in, out);
  return out;
}

Plane BandOperator::adjoint(std::span<const double> in) const {
  Plane out(grid_.pixels());
  adjoint(in, out);
  return out;
}

Plane BandOperator::gradient(std::span<const double> x,
                             std::span<const double> y) const {
  CheckSize(y.size(), "data");
  Plane residual = apply(x);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= y[i];
  return adjoint(residual);
}

PsfSet::PsfSet(const ImageCube& psf_cube) : grid_(psf_cube.grid()) {
  operators_.reserve(psf_cube.bands());
  for (std::size_t l = 0; l < psf_cube.bands(); ++l) {
    operators_.emplace_back(grid_, psf_cube.plane(l));
  }
}

double PsfSet::max_norm_squared() const noexcept {
  double beta = 0.0;
  for (const auto& op : operators_) beta = std::max(beta, op.norm_squared());
  return beta;
}

ImageCube PsfSet::apply(const ImageCube& sky) const {
  if (sky.grid() != grid_ || sky.bands() != bands()) {
    throw DimensionError("sky cube does not match the PSF set");
  }
  ImageCube out(sky.grid(), sky.bands(), sky.wavelengths());
  for (std::size_t l = 0; l < bands(); ++l) {
    operators_[l].apply(sky.plane(l), out.plane(l));
  }
  return out;
}

}  // namespace muffin
