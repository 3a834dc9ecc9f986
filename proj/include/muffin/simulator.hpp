#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "muffin/cube.hpp"
#include "muffin/operators.hpp"

namespace muffin {

/// Wavelengths uniform over [reference, 2 * reference]; band 0 is the
/// reference band.
std::vector<double> wavelength_grid(std::size_t bands, double reference = 1.0);

/// Synthetic PSF cube from a random Hermitian-symmetric Fourier mask per
/// band. Low spatial frequencies are favoured, and longer wavelengths push
/// coverage further toward the centre of the uv plane. Each band keeps
/// ceil(fill_fraction * N) cells; the DC cell is always measured. PSF peaks
/// (at pixel 0) are normalized to 1. fill_fraction = 1 yields a delta.
ImageCube make_psf_cube(Grid grid, std::size_t bands, double fill_fraction,
                        std::uint64_t seed);

/// Reference sky, spectral-index map and the reference band index.
struct SkyModel {
  Grid grid;
  Plane reference;       ///< >= 0
  Plane spectral_index;  ///< beta(n)
  std::size_t reference_band = 0;
};

/// Zero-mean, unit-variance periodic Gaussian random field with a Gaussian
/// correlation kernel of the given length (pixels).
Plane gaussian_random_field(Grid grid, double correlation_length,
                            std::uint64_t seed);

/// Nonnegative extended-emission test image: Gaussian blobs of various sizes
/// plus a few compact sources, peak equal to `peak`.
Plane make_reference_image(Grid grid, std::uint64_t seed, double peak = 1.0);

/// beta(n) = a * G(n) + b * x_ref(n) / max(x_ref), G with correlation length
/// grid/8.
SkyModel make_sky_model(Plane reference, Grid grid, std::uint64_t seed,
                        double a = 0.3, double b = 0.5);

/// x_l(n) = x_ref(n) * (lambda_ref / lambda_l)^beta(n).
ImageCube make_sky_cube(const SkyModel& sky, std::span<const double> wavelengths);

struct NoisyCube {
  ImageCube dirty;
  NoiseModel noise;
  double realized_snr_db = 0.0;
};

/// Variance used for an infinite target SNR.
inline constexpr double kNoiselessVariance = 1e-30;

/// Adds i.i.d. Gaussian noise with a single variance
/// ||clean||^2 / (N L 10^(snr/10)). An infinite target adds nothing and
/// reports kNoiselessVariance.
NoisyCube add_noise(const ImageCube& clean, double snr_db, std::uint64_t seed);

struct SimulationConfig {
  Grid grid{32, 32};
  std::size_t bands = 4;
  double fill_fraction = 0.25;
  double snr_db = 10.0;
  /// Sky brightness scale; the default weight intervals [0, 2] and [0, 3]
  /// bracket the best weights at this scale.
  double peak = 10.0;
  double index_noise_weight = 0.3;
  double index_image_weight = 0.5;
  std::uint64_t sky_seed = 1;
  std::uint64_t psf_seed = 2;
  std::uint64_t noise_seed = 3;
};

struct Dataset {
  ImageCube sky;
  ImageCube psf;
  ImageCube clean;  ///< H x*, before noise
  ImageCube dirty;
  NoiseModel noise;
  double realized_snr_db = 0.0;
};

Dataset simulate_dataset(const SimulationConfig& config);

}  // namespace muffin
