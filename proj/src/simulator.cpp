#include "muffin/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "fft_plan.hpp"
#include "muffin/error.hpp"

namespace muffin {

namespace {

// Signed frequency index of bin k on an axis of length n.
long SignedFrequency(std::size_t k, std::size_t n) {
  return k <= n / 2 ? static_cast<long>(k)
                    : static_cast<long>(k) - static_cast<long>(n);
}

std::size_t MirrorIndex(std::size_t k, std::size_t n) { return (n - k) % n; }

// Full-plane real-valued inverse DFT of a Hermitian spectrum given on the
// whole grid, via the half-spectrum c2r transform.
Plane InverseRealTransform(const FftPlan& plan, const std::vector<double>& mask) {
  const Grid grid = plan.grid();
  const std::size_t half = grid.width / 2 + 1;
  std::vector<std::complex<double>> spectrum(plan.spectrum_size());
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < half; ++c) {
      spectrum[r * half + c] = mask[r * grid.width + c];
    }
  }
  Plane out(grid.pixels());
  plan.inverse(spectrum, out);
  for (double& v : out) v /= static_cast<double>(grid.pixels());
  return out;
}

}  // namespace

std::vector<double> wavelength_grid(std::size_t bands, double reference) {
  std::vector<double> out(bands, reference);
  for (std::size_t l = 1; l < bands; ++l) {
    out[l] = reference * (1.0 + static_cast<double>(l) /
                                    static_cast<double>(bands - 1));
  }
  return out;
}

ImageCube make_psf_cube(Grid grid, std::size_t bands, double fill_fraction,
                        std::uint64_t seed) {
  if (!(fill_fraction > 0.0) || fill_fraction > 1.0) {
    throw ConfigError("fill fraction must lie in (0, 1]");
  }
  if (grid.pixels() == 0 || bands == 0) {
    throw ConfigError("PSF cube needs a non-empty grid and at least one band");
  }
  const std::size_t width = grid.width, height = grid.height;
  const std::size_t n = grid.pixels();
  const auto wavelengths = wavelength_grid(bands);

  // One uniform draw per Hermitian pair, shared by all bands so coverage
  // varies smoothly with wavelength.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> draw(n, -1.0);
  std::vector<std::size_t> representatives;
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t cell = r * width + c;
      const std::size_t mirror =
          MirrorIndex(r, height) * width + MirrorIndex(c, width);
      if (draw[cell] >= 0.0) continue;
      const double u = uniform(rng);
      draw[cell] = u;
      draw[mirror] = u;
      representatives.push_back(cell);
    }
  }

  const double max_radius =
      std::hypot(static_cast<double>(width / 2), static_cast<double>(height / 2));
  const auto target = static_cast<std::size_t>(
      std::ceil(fill_fraction * static_cast<double>(n) - 1e-9));

  ImageCube cube(grid, bands, wavelengths);
  const auto plan = FftPlan::For(grid);
  for (std::size_t l = 0; l < bands; ++l) {
    const double stretch = wavelengths[l] / wavelengths[0];
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(representatives.size());
    for (std::size_t cell : representatives) {
      const std::size_t r = cell / width, c = cell % width;
      const double radius =
          std::hypot(static_cast<double>(SignedFrequency(c, width)),
                     static_cast<double>(SignedFrequency(r, height))) /
          max_radius * stretch;
      const double priority = cell == 0 ? -1.0 : draw[cell] * (0.05 + radius * radius);
      order.emplace_back(priority, cell);
    }
    std::sort(order.begin(), order.end());

    std::vector<double> mask(n, 0.0);
    std::size_t filled = 0;
    for (const auto& [priority, cell] : order) {
      if (filled >= target) break;
      const std::size_t r = cell / width, c = cell % width;
      const std::size_t mirror =
          MirrorIndex(r, height) * width + MirrorIndex(c, width);
      mask[cell] = 1.0;
      mask[mirror] = 1.0;
      filled += mirror == cell ? 1 : 2;
    }

    Plane psf = InverseRealTransform(*plan, mask);
    const double peak = psf[0];
    for (double& v : psf) v /= peak;
    std::copy(psf.begin(), psf.end(), cube.plane(l).begin());
  }
  return cube;
}

Plane gaussian_random_field(Grid grid, double correlation_length,
                            std::uint64_t seed) {
  const std::size_t n = grid.pixels();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Plane white(n);
  for (double& v : white) v = normal(rng);

  // Periodic Gaussian kernel centred on pixel 0.
  Plane kernel(n);
  const double scale = std::max(correlation_length, 1e-6);
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      const double dy = static_cast<double>(SignedFrequency(r, grid.height));
      const double dx = static_cast<double>(SignedFrequency(c, grid.width));
      kernel[r * grid.width + c] =
          std::exp(-0.5 * (dx * dx + dy * dy) / (scale * scale));
    }
  }
  Plane field = BandOperator(grid, kernel).apply(white);
  const double mean = std::accumulate(field.begin(), field.end(), 0.0) /
                      static_cast<double>(n);
  double var = 0.0;
  for (double& v : field) {
    v -= mean;
    var += v * v;
  }
  const double stdev = std::sqrt(var / static_cast<double>(n));
  if (stdev > 0.0) {
    for (double& v : field) v /= stdev;
  }
  return field;
}

Plane make_reference_image(Grid grid, std::uint64_t seed, double peak) {
  const std::size_t width = grid.width, height = grid.height;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Plane image(grid.pixels(), 0.0);
  const double side = static_cast<double>(std::min(width, height));

  auto add_blob = [&](double cx, double cy, double sx, double sy, double angle,
                      double amplitude) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double dx = static_cast<double>(c) - cx;
        const double dy = static_cast<double>(r) - cy;
        const double u = (ca * dx + sa * dy) / sx;
        const double v = (-sa * dx + ca * dy) / sy;
        const double q = 0.5 * (u * u + v * v);
        if (q < 30.0) image[r * width + c] += amplitude * std::exp(-q);
      }
    }
  };

  // Extended emission concentrated in the central region.
  const std::size_t blobs = std::max<std::size_t>(3, width / 4);
  for (std::size_t k = 0; k < blobs; ++k) {
    const double cx = (0.2 + 0.6 * uniform(rng)) * static_cast<double>(width);
    const double cy = (0.2 + 0.6 * uniform(rng)) * static_cast<double>(height);
    const double sx = side * (0.03 + 0.09 * uniform(rng));
    const double sy = side * (0.03 + 0.09 * uniform(rng));
    add_blob(cx, cy, sx, sy, 3.14159 * uniform(rng), 0.3 + 0.7 * uniform(rng));
  }
  // A few compact sources.
  const std::size_t compact = std::max<std::size_t>(2, width / 16);
  for (std::size_t k = 0; k < compact; ++k) {
    const double cx = (0.1 + 0.8 * uniform(rng)) * static_cast<double>(width);
    const double cy = (0.1 + 0.8 * uniform(rng)) * static_cast<double>(height);
    add_blob(cx, cy, 0.6, 0.6, 0.0, 0.8 + 0.7 * uniform(rng));
  }

  // Faint wings are dropped so the background is exactly empty.
  const double max_value = *std::max_element(image.begin(), image.end());
  for (double& v : image) {
    v = v < 0.02 * max_value ? 0.0 : v * peak / max_value;
  }
  return image;
}

SkyModel make_sky_model(Plane reference, Grid grid, std::uint64_t seed,
                        double a, double b) {
  if (reference.size() != grid.pixels()) {
    throw DimensionError("reference image does not match the grid");
  }
  for (double v : reference) {
    if (!(v >= 0.0)) throw ConfigError("reference image must be >= 0");
  }
  const double correlation =
      static_cast<double>(std::min(grid.width, grid.height)) / 8.0;
  const Plane field = gaussian_random_field(grid, correlation, seed);
  const double max_value = *std::max_element(reference.begin(), reference.end());
  SkyModel sky{grid, std::move(reference), Plane(grid.pixels()), 0};
  for (std::size_t i = 0; i < grid.pixels(); ++i) {
    const double normalized = max_value > 0.0 ? sky.reference[i] / max_value : 0.0;
    sky.spectral_index[i] = a * field[i] + b * normalized;
  }
  return sky;
}

ImageCube make_sky_cube(const SkyModel& sky,
                        std::span<const double> wavelengths) {
  const std::size_t bands = wavelengths.size();
  if (bands == 0 || sky.reference_band >= bands) {
    throw ConfigError("sky cube needs the reference band among the wavelengths");
  }
  for (double w : wavelengths) {
    if (!(w > 0.0)) throw ConfigError("wavelengths must be positive");
  }
  if (sky.reference.size() != sky.grid.pixels() ||
      sky.spectral_index.size() != sky.grid.pixels()) {
    throw DimensionError("sky model planes do not match its grid");
  }
  const double reference_wavelength = wavelengths[sky.reference_band];
  ImageCube cube(sky.grid, bands,
                 std::vector<double>(wavelengths.begin(), wavelengths.end()));
  for (std::size_t l = 0; l < bands; ++l) {
    const double ratio = reference_wavelength / wavelengths[l];
    auto plane = cube.plane(l);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      plane[i] = sky.reference[i] * std::pow(ratio, sky.spectral_index[i]);
    }
  }
  return cube;
}

NoisyCube add_noise(const ImageCube& clean, double snr_db, std::uint64_t seed) {
  double energy = 0.0;
  for (double v : clean.data()) energy += v * v;
  if (!(energy > 0.0)) throw ConfigError("cannot calibrate noise on a zero cube");
  if (std::isnan(snr_db)) throw ConfigError("target SNR is NaN");

  NoisyCube out{clean, {}, std::numeric_limits<double>::infinity()};
  if (std::isinf(snr_db) && snr_db > 0) {
    out.noise = NoiseModel::uniform(clean.bands(), kNoiselessVariance);
    return out;
  }
  const double count = static_cast<double>(clean.size());
  const double variance = energy / (count * std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  double noise_energy = 0.0;
  for (double& v : out.dirty.data()) {
    const double n = normal(rng);
    noise_energy += n * n;
    v += n;
  }
  out.noise = NoiseModel::uniform(clean.bands(), variance);
  out.realized_snr_db = 10.0 * std::log10(energy / noise_energy);
  return out;
}

Dataset simulate_dataset(const SimulationConfig& config) {
  if (config.bands == 0) throw ConfigError("bands must be >= 1");
  const auto wavelengths = wavelength_grid(config.bands);
  Plane reference = make_reference_image(config.grid, config.sky_seed, config.peak);
  const SkyModel model =
      make_sky_model(std::move(reference), config.grid, config.sky_seed + 1000,
                     config.index_noise_weight, config.index_image_weight);
  Dataset data;
  data.sky = make_sky_cube(model, wavelengths);
  data.psf = make_psf_cube(config.grid, config.bands, config.fill_fraction,
                           config.psf_seed);
  data.clean = PsfSet(data.psf).apply(data.sky);
  NoisyCube noisy = add_noise(data.clean, config.snr_db, config.noise_seed);
  data.dirty = std::move(noisy.dirty);
  data.noise = std::move(noisy.noise);
  data.realized_snr_db = noisy.realized_snr_db;
  return data;
}

}  // namespace muffin
