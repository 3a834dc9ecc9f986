#include "muffin/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "muffin/error.hpp"

namespace muffin {

namespace {

std::size_t ChunkCount(std::size_t pixels) {
  return (pixels + kPixelChunk - 1) / kPixelChunk;
}

void CheckFinite(const ImageCube& cube, std::size_t iteration,
                 const char* what) {
  for (std::size_t l = 0; l < cube.bands(); ++l) {
    for (double v : cube.plane(l)) {
      if (!std::isfinite(v)) {
        throw NumericalError(std::string("non-finite ") + what, l, iteration);
      }
    }
  }
}

}  // namespace

void SolverParams::validate() const {
  if (!(mu_s >= 0.0) || !std::isfinite(mu_s)) {
    throw ConfigError("mu_s must be finite and >= 0");
  }
  if (!(mu_lambda >= 0.0) || !std::isfinite(mu_lambda)) {
    throw ConfigError("mu_lambda must be finite and >= 0");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("tau must be finite and > 0");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("sigma must be finite and > 0");
  }
}

double convergence_certificate(const SolverParams& params, double beta,
                               std::size_t basis_count) {
  const double b = static_cast<double>(basis_count);
  return params.tau *
         (beta / 2.0 + params.sigma * (params.mu_s * params.mu_s * b +
                                       params.mu_lambda * params.mu_lambda));
}

double auto_tau(double beta, double sigma, double mu_s, double mu_lambda,
                std::size_t basis_count, double target) {
  const double b = static_cast<double>(basis_count);
  const double denom = beta / 2.0 + sigma * (mu_s * mu_s * b + mu_lambda * mu_lambda);
  if (!(denom > 0.0)) throw ConfigError("cannot derive tau: zero operator norm");
  return target / denom;
}

Problem::Problem(ImageCube dirty, const ImageCube& psf_cube)
    : Problem(std::move(dirty), psf_cube, SpatialAnalysis(psf_cube.grid())) {}

Problem::Problem(ImageCube dirty, const ImageCube& psf_cube,
                 SpatialAnalysis spatial)
    : dirty_(std::move(dirty)),
      psfs_(psf_cube),
      spatial_(std::move(spatial)),
      spectral_(std::max<std::size_t>(1, dirty_.bands())) {
  if (!dirty_.same_shape(psf_cube)) {
    throw DimensionError("dirty cube and PSF cube shapes differ");
  }
  if (spatial_.grid() != dirty_.grid()) {
    throw DimensionError("spatial transform grid differs from the data grid");
  }
  if (!dirty_.all_finite()) {
    throw NumericalError("dirty cube contains non-finite values");
  }
}

SolverState SolverState::cold_start(const Problem& problem) {
  const Grid grid = problem.grid();
  const std::size_t bands = problem.bands();
  const std::size_t basis = problem.spatial().basis_count();
  const auto& wl = problem.dirty().wavelengths();
  SolverState state;
  state.x = ImageCube(grid, bands, wl);
  state.x_tilde = ImageCube(grid, bands, wl);
  state.t = ImageCube(grid, bands, wl);
  state.m = ImageCube(grid, bands, wl);
  state.u = CoefficientCube(grid, basis, bands);
  state.p = CoefficientCube(grid, basis, bands);
  state.v = CoefficientCube(grid, 1, bands);
  state.v_tilde = CoefficientCube(grid, 1, bands);
  return state;
}

void sat(std::span<double> values) {
  for (double& v : values) v = std::clamp(v, -1.0, 1.0);
}

std::vector<double> sat(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  sat(std::span<double>(out));
  return out;
}

void project_positive(std::span<double> values) {
  for (double& v : values) v = std::max(v, 0.0);
}

Plane project_positive(std::span<const double> values) {
  Plane out(values.begin(), values.end());
  project_positive(std::span<double>(out));
  return out;
}

BandSlice band_slice(SolverState& state, std::size_t band) {
  return BandSlice{state.x.plane(band), state.x_tilde.plane(band),
                   state.u.band(band), state.m.plane(band),
                   state.p.band(band)};
}

void band_update(const BandSlice& band, std::span<const double> t,
                 std::span<const double> y, const BandOperator& op,
                 const SpatialAnalysis& spatial, const SolverParams& params) {
  const std::size_t n = op.grid().pixels();
  if (band.x.size() != n || band.x_tilde.size() != n || band.m.size() != n ||
      t.size() != n || y.size() != n ||
      band.u.size() != n * spatial.basis_count() ||
      band.p.size() != band.u.size()) {
    throw DimensionError("band_update: slice shapes do not match the grid");
  }

  std::copy(band.x_tilde.begin(), band.x_tilde.end(), band.x.begin());
  const Plane grad = op.gradient(band.x, y);
  Plane s(n, 0.0);
  if (params.mu_s != 0.0) {
    spatial.adjoint(band.u, s);
    for (double& v : s) v *= params.mu_s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    band.m[i] = band.x[i] - params.tau * (grad[i] + s[i] + t[i]);
    band.x_tilde[i] = std::max(band.m[i], 0.0);
  }

  if (params.mu_s != 0.0) {
    Plane extrapolated(n);
    for (std::size_t i = 0; i < n; ++i) {
      extrapolated[i] = 2.0 * band.x_tilde[i] - band.x[i];
    }
    spatial.analyze(extrapolated, band.p);
    const double gain = params.sigma * params.mu_s;
    for (std::size_t k = 0; k < band.p.size(); ++k) {
      band.p[k] = band.u[k] + gain * band.p[k];
    }
  } else {
    std::copy(band.u.begin(), band.u.end(), band.p.begin());
  }
  for (std::size_t k = 0; k < band.p.size(); ++k) {
    band.u[k] = std::clamp(band.p[k], -1.0, 1.0);
  }
}

void update_feedback(SolverState& state, const SpectralAnalysis& spectral,
                     double mu_lambda, const WorkerPool& pool) {
  const std::size_t pixels = state.t.pixels();
  auto t = state.t.data();
  if (mu_lambda == 0.0) {
    std::fill(t.begin(), t.end(), 0.0);
    return;
  }
  pool.for_each(ChunkCount(pixels), [&](std::size_t chunk) {
    const std::size_t begin = chunk * kPixelChunk;
    const std::size_t end = std::min(pixels, begin + kPixelChunk);
    spectral.adjoint_pixels(state.v.data(), t, pixels, begin, end);
    for (std::size_t l = 0; l < state.t.bands(); ++l) {
      double* row = t.data() + l * pixels;
      for (std::size_t i = begin; i < end; ++i) row[i] *= mu_lambda;
    }
  });
}

void master_update(SolverState& state, const SpectralAnalysis& spectral,
                   const SolverParams& params, const WorkerPool& pool) {
  const std::size_t pixels = state.x.pixels();
  const std::size_t bands = state.x.bands();
  if (!state.x.same_shape(state.x_tilde) || state.v.size() != pixels * bands ||
      state.v_tilde.size() != state.v.size() ||
      spectral.length() != bands) {
    throw DimensionError("master_update: band data missing or misshapen");
  }
  auto v = state.v.data();
  auto v_tilde = state.v_tilde.data();
  const double gain = params.sigma * params.mu_lambda;
  if (params.mu_lambda == 0.0) {
    std::copy(v.begin(), v.end(), v_tilde.begin());
    sat(v);
    return;
  }
  std::vector<double> extrapolated(pixels * bands);
  pool.for_each(ChunkCount(pixels), [&](std::size_t chunk) {
    const std::size_t begin = chunk * kPixelChunk;
    const std::size_t end = std::min(pixels, begin + kPixelChunk);
    for (std::size_t l = 0; l < bands; ++l) {
      const auto xt = state.x_tilde.plane(l);
      const auto x = state.x.plane(l);
      for (std::size_t i = begin; i < end; ++i) {
        extrapolated[l * pixels + i] = 2.0 * xt[i] - x[i];
      }
    }
    spectral.analyze_pixels(extrapolated, v_tilde, pixels, begin, end);
    for (std::size_t k = 0; k < bands; ++k) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = k * pixels + i;
        v_tilde[idx] = v[idx] + gain * v_tilde[idx];
        v[idx] = std::clamp(v_tilde[idx], -1.0, 1.0);
      }
    }
  });
}

void muffin_iterate(SolverState& state, const Problem& problem,
                    const SolverParams& params, const WorkerPool& pool) {
  if (!state.x_tilde.same_shape(problem.dirty())) {
    throw DimensionError("solver state does not match the problem");
  }
  update_feedback(state, problem.spectral(), params.mu_lambda, pool);
  pool.for_each(problem.bands(), [&](std::size_t l) {
    band_update(band_slice(state, l), state.t.plane(l),
                problem.dirty().plane(l), problem.psfs()[l], problem.spatial(),
                params);
  });
  master_update(state, problem.spectral(), params, pool);
  ++state.iteration;
  CheckFinite(state.x_tilde, state.iteration, "primal iterate");
}

double cost(const ImageCube& estimate, const Problem& problem,
            const SolverParams& params, const WorkerPool& pool) {
  if (!estimate.same_shape(problem.dirty())) {
    throw DimensionError("cost: estimate does not match the problem");
  }
  for (double v : estimate.data()) {
    if (v < 0.0) return std::numeric_limits<double>::infinity();
  }
  const std::size_t bands = problem.bands();
  const std::size_t pixels = problem.pixels();
  std::vector<double> band_terms(bands, 0.0);
  pool.for_each(bands, [&](std::size_t l) {
    const auto x = estimate.plane(l);
    const auto y = problem.dirty().plane(l);
    const Plane hx = problem.psfs()[l].apply(x);
    double fidelity = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) {
      const double r = y[i] - hx[i];
      fidelity += r * r;
    }
    double sparsity = 0.0;
    if (params.mu_s != 0.0) {
      for (double c : problem.spatial().analyze(x)) sparsity += std::abs(c);
    }
    band_terms[l] = 0.5 * fidelity + params.mu_s * sparsity;
  });
  double total = 0.0;
  for (double term : band_terms) total += term;

  if (params.mu_lambda != 0.0) {
    std::vector<double> coeffs(pixels * bands);
    problem.spectral().analyze_pixels(estimate.data(), coeffs, pixels, 0,
                                      pixels);
    double spectral = 0.0;
    for (double c : coeffs) spectral += std::abs(c);
    total += params.mu_lambda * spectral;
  }
  return total;
}

}  // namespace muffin
