#include "muffin/psure.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "muffin/error.hpp"

namespace muffin {

namespace {

std::size_t ChunkCount(std::size_t pixels) {
  return (pixels + kPixelChunk - 1) / kPixelChunk;
}

}  // namespace

ProbeVector ProbeVector::rademacher(Grid grid, std::size_t bands,
                                    std::uint64_t seed) {
  ProbeVector probe{ImageCube(grid, bands), seed};
  std::mt19937_64 rng(seed);
  auto data = probe.values.data();
  std::size_t i = 0;
  while (i < data.size()) {
    std::uint64_t bits = rng();
    for (int b = 0; b < 64 && i < data.size(); ++b, ++i) {
      data[i] = (bits & 1u) ? 1.0 : -1.0;
      bits >>= 1;
    }
  }
  return probe;
}

ShadowState ShadowState::zeros(const Problem& problem, ProbeVector probe) {
  if (!probe.values.same_shape(problem.dirty())) {
    throw DimensionError("probe does not match the problem");
  }
  const Grid grid = problem.grid();
  const std::size_t bands = problem.bands();
  ShadowState shadow;
  shadow.jx = ImageCube(grid, bands);
  shadow.jx_tilde = ImageCube(grid, bands);
  shadow.jt = ImageCube(grid, bands);
  shadow.ju = CoefficientCube(grid, problem.spatial().basis_count(), bands);
  shadow.jv = CoefficientCube(grid, 1, bands);
  shadow.probe = std::move(probe);
  return shadow;
}

std::vector<double> indicator_U(std::span<const double> m) {
  std::vector<double> mask(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m[i] > 0.0 ? 1.0 : 0.0;
  return mask;
}

std::vector<double> indicator_Pi(std::span<const double> p) {
  std::vector<double> mask(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    mask[i] = (p[i] >= -1.0 && p[i] <= 1.0) ? 1.0 : 0.0;
  }
  return mask;
}

ShadowBandSlice shadow_band_slice(ShadowState& shadow, std::size_t band) {
  return ShadowBandSlice{shadow.jx.plane(band), shadow.jx_tilde.plane(band),
                         shadow.ju.band(band)};
}

void shadow_band_update(const ShadowBandSlice& band, std::span<const double> m,
                        std::span<const double> p,
                        std::span<const double> probe,
                        std::span<const double> jt, const BandOperator& op,
                        const SpatialAnalysis& spatial,
                        const SolverParams& params) {
  const std::size_t n = op.grid().pixels();
  if (band.jx.size() != n || band.jx_tilde.size() != n || m.size() != n ||
      probe.size() != n || jt.size() != n ||
      band.ju.size() != n * spatial.basis_count() ||
      p.size() != band.ju.size()) {
    throw DimensionError("shadow_band_update: slice shapes do not match");
  }

  std::copy(band.jx_tilde.begin(), band.jx_tilde.end(), band.jx.begin());
  const Plane jgrad = op.gradient(band.jx, probe);
  Plane js(n, 0.0);
  if (params.mu_s != 0.0) {
    spatial.adjoint(band.ju, js);
    for (double& v : js) v *= params.mu_s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double jm = band.jx[i] - params.tau * (jgrad[i] + js[i] + jt[i]);
    band.jx_tilde[i] = m[i] > 0.0 ? jm : 0.0;
  }

  if (params.mu_s != 0.0) {
    Plane extrapolated(n);
    for (std::size_t i = 0; i < n; ++i) {
      extrapolated[i] = 2.0 * band.jx_tilde[i] - band.jx[i];
    }
    std::vector<double> jp(band.ju.size());
    spatial.analyze(extrapolated, jp);
    const double gain = params.sigma * params.mu_s;
    for (std::size_t k = 0; k < jp.size(); ++k) {
      const double inside = (p[k] >= -1.0 && p[k] <= 1.0) ? 1.0 : 0.0;
      band.ju[k] = inside * (band.ju[k] + gain * jp[k]);
    }
  } else {
    for (std::size_t k = 0; k < band.ju.size(); ++k) {
      if (!(p[k] >= -1.0 && p[k] <= 1.0)) band.ju[k] = 0.0;
    }
  }
}

void shadow_update_feedback(ShadowState& shadow,
                            const SpectralAnalysis& spectral, double mu_lambda,
                            const WorkerPool& pool) {
  const std::size_t pixels = shadow.jt.pixels();
  auto jt = shadow.jt.data();
  if (mu_lambda == 0.0) {
    std::fill(jt.begin(), jt.end(), 0.0);
    return;
  }
  pool.for_each(ChunkCount(pixels), [&](std::size_t chunk) {
    const std::size_t begin = chunk * kPixelChunk;
    const std::size_t end = std::min(pixels, begin + kPixelChunk);
    spectral.adjoint_pixels(shadow.jv.data(), jt, pixels, begin, end);
    for (std::size_t l = 0; l < shadow.jt.bands(); ++l) {
      double* row = jt.data() + l * pixels;
      for (std::size_t i = begin; i < end; ++i) row[i] *= mu_lambda;
    }
  });
}

void shadow_master_update(ShadowState& shadow, const SolverState& state,
                          const SpectralAnalysis& spectral,
                          const SolverParams& params, const WorkerPool& pool) {
  const std::size_t pixels = shadow.jx.pixels();
  const std::size_t bands = shadow.jx.bands();
  if (!state.v_tilde.same_shape(shadow.jv) ||
      !shadow.jx.same_shape(shadow.jx_tilde) || spectral.length() != bands) {
    throw DimensionError("shadow_master_update: band data missing or misshapen");
  }
  auto jv = shadow.jv.data();
  const auto v_tilde = state.v_tilde.data();
  if (params.mu_lambda == 0.0) {
    for (std::size_t k = 0; k < jv.size(); ++k) {
      if (!(v_tilde[k] >= -1.0 && v_tilde[k] <= 1.0)) jv[k] = 0.0;
    }
    return;
  }
  const double gain = params.sigma * params.mu_lambda;
  std::vector<double> extrapolated(pixels * bands);
  std::vector<double> coeffs(pixels * bands);
  pool.for_each(ChunkCount(pixels), [&](std::size_t chunk) {
    const std::size_t begin = chunk * kPixelChunk;
    const std::size_t end = std::min(pixels, begin + kPixelChunk);
    for (std::size_t l = 0; l < bands; ++l) {
      const auto jxt = shadow.jx_tilde.plane(l);
      const auto jx = shadow.jx.plane(l);
      for (std::size_t i = begin; i < end; ++i) {
        extrapolated[l * pixels + i] = 2.0 * jxt[i] - jx[i];
      }
    }
    spectral.analyze_pixels(extrapolated, coeffs, pixels, begin, end);
    for (std::size_t k = 0; k < bands; ++k) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = k * pixels + i;
        const double inside =
            (v_tilde[idx] >= -1.0 && v_tilde[idx] <= 1.0) ? 1.0 : 0.0;
        jv[idx] = inside * (jv[idx] + gain * coeffs[idx]);
      }
    }
  });
}

void shadow_iterate(ShadowState& shadow, const SolverState& state,
                    const Problem& problem, const SolverParams& params,
                    const WorkerPool& pool) {
  if (shadow.iteration + 1 != state.iteration) {
    throw ConfigError("shadow at iteration " +
                      std::to_string(shadow.iteration) +
                      " cannot follow solver iteration " +
                      std::to_string(state.iteration));
  }
  shadow_update_feedback(shadow, problem.spectral(), params.mu_lambda, pool);
  pool.for_each(problem.bands(), [&](std::size_t l) {
    shadow_band_update(shadow_band_slice(shadow, l), state.m.plane(l),
                       state.p.band(l), shadow.probe.values.plane(l),
                       shadow.jt.plane(l), problem.psfs()[l],
                       problem.spatial(), params);
  });
  shadow_master_update(shadow, state, problem.spectral(), params, pool);
  ++shadow.iteration;
  for (std::size_t l = 0; l < shadow.jx_tilde.bands(); ++l) {
    for (double v : shadow.jx_tilde.plane(l)) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite Jacobian shadow", l, shadow.iteration);
      }
    }
  }
}

RiskReport psure_evaluate(const ImageCube& estimate,
                          const ImageCube& jacobian_probe,
                          const ImageCube& dirty, const PsfSet& psfs,
                          const NoiseModel& noise, const ImageCube& probe,
                          const WorkerPool& pool, std::size_t iteration) {
  const std::size_t bands = dirty.bands();
  if (!estimate.same_shape(dirty) || !jacobian_probe.same_shape(dirty) ||
      !probe.same_shape(dirty) || psfs.bands() != bands ||
      psfs.grid() != dirty.grid()) {
    throw DimensionError("psure_evaluate: inputs have different shapes");
  }
  noise.validate(bands);
  const std::size_t pixels = dirty.pixels();

  RiskReport report;
  report.iteration = iteration;
  report.per_band.assign(bands, 0.0);
  pool.for_each(bands, [&](std::size_t l) {
    const auto& op = psfs[l];
    const auto y = dirty.plane(l);
    const auto e = probe.plane(l);
    const Plane hx = op.apply(estimate.plane(l));
    const Plane hj = op.apply(jacobian_probe.plane(l));
    double fit = 0.0;
    double trace = 0.0;
    for (std::size_t i = 0; i < pixels; ++i) {
      const double r = y[i] - hx[i];
      fit += r * r;
      trace += e[i] * hj[i];
    }
    const double variance = noise.variances[l];
    report.per_band[l] = fit + 2.0 * variance * trace -
                         static_cast<double>(pixels) * variance;
  });
  for (std::size_t l = 0; l < bands; ++l) {
    if (std::isnan(report.per_band[l])) {
      throw NumericalError("PSURE is NaN", l, iteration);
    }
    report.total += report.per_band[l];
  }
  report.wmse_hat =
      report.total / static_cast<double>(bands * pixels);
  return report;
}

RiskReport psure_evaluate(const SolverState& state, const ShadowState& shadow,
                          const Problem& problem, const NoiseModel& noise,
                          const WorkerPool& pool) {
  if (shadow.iteration != state.iteration) {
    throw ConfigError("shadow is at iteration " +
                      std::to_string(shadow.iteration) + ", solver at " +
                      std::to_string(state.iteration));
  }
  return psure_evaluate(state.x_tilde, shadow.jx_tilde, problem.dirty(),
                        problem.psfs(), noise, shadow.probe.values, pool,
                        state.iteration);
}

double hutchinson_trace(const LinearMap& matvec, std::span<const double> e) {
  std::vector<double> image(e.size());
  matvec(e, image);
  double trace = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) trace += e[i] * image[i];
  return trace;
}

}  // namespace muffin
