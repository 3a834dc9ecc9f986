#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "muffin/cube.hpp"
#include "muffin/simulator.hpp"

namespace muffin::testing {

inline Plane RandomPlane(std::size_t n, std::uint64_t seed, double lo = -1.0,
                         double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Plane out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

inline ImageCube RandomCube(Grid grid, std::size_t bands, std::uint64_t seed,
                            double lo = -1.0, double hi = 1.0) {
  return ImageCube(grid, bands, RandomPlane(grid.pixels() * bands, seed, lo, hi),
                   {});
}

inline double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline bool Same(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

inline double Norm2(std::span<const double> a) { return Dot(a, a); }

inline double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double MaxAbs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// out(r, c) = sum_{i, j} psf(i, j) img((r - i) mod h, (c - j) mod w).
inline Plane CircularConvolve(Grid grid, std::span<const double> psf,
                              std::span<const double> img) {
  const std::size_t w = grid.width, h = grid.height;
  Plane out(grid.pixels(), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          s += psf[i * w + j] * img[((r + h - i) % h) * w + (c + w - j) % w];
        }
      }
      out[r * w + c] = s;
    }
  }
  return out;
}

struct Instance {
  ImageCube sky;
  ImageCube psf;
  ImageCube dirty;
  NoiseModel noise;
};

// Small simulated dataset at unit peak brightness.
inline Instance MakeInstance(Grid grid, std::size_t bands, std::uint64_t seed,
                             double snr_db = 10.0, double fill = 0.25) {
  SimulationConfig config;
  config.grid = grid;
  config.bands = bands;
  config.fill_fraction = fill;
  config.peak = 1.0;
  config.snr_db = snr_db;
  config.sky_seed = seed;
  config.psf_seed = seed + 1;
  config.noise_seed = seed + 2;
  Dataset data = simulate_dataset(config);
  return {std::move(data.sky), std::move(data.psf), std::move(data.dirty),
          std::move(data.noise)};
}

}  // namespace muffin::testing
