#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "muffin/cube.hpp"
#include "muffin/parallel.hpp"
#include "muffin/solver.hpp"

namespace muffin {

/// Probe e for the randomized trace estimate: i.i.d. Rademacher (+1/-1)
/// entries, one per (pixel, band). Drawn once per run.
struct ProbeVector {
  ImageCube values;
  std::uint64_t seed = 0;

  static ProbeVector rademacher(Grid grid, std::size_t bands,
                                std::uint64_t seed);
};

/// Directional derivatives J_e(.) of every solver variable with respect to
/// the dirty cube, along the probe e.
struct ShadowState {
  ImageCube jx;
  ImageCube jx_tilde;
  ImageCube jt;
  CoefficientCube ju;
  CoefficientCube jv;
  ProbeVector probe;
  std::size_t iteration = 0;

  static ShadowState zeros(const Problem& problem, ProbeVector probe);
};

/// U(m): 1 where m > 0, else 0 (so U(0) = 0).
std::vector<double> indicator_U(std::span<const double> m);
/// Pi(p): 1 where -1 <= p <= 1, else 0.
std::vector<double> indicator_Pi(std::span<const double> p);

struct ShadowBandSlice {
  std::span<double> jx;
  std::span<double> jx_tilde;
  std::span<double> ju;
};

ShadowBandSlice shadow_band_slice(ShadowState& shadow, std::size_t band);

/// Derivative of band_update along e. `m` and `p` are the solver's own
/// pre-projection values from the same iterate; `probe` is e_l and `jt` is
/// J_e(t_l).
///   J(x) <- J(x~);  J(grad) = H^T (H J(x) - e);  J(s) = mu_s W_s^T J(u);
///   J(m) = J(x) - tau (J(grad) + J(s) + J(t));  J(x~) = U(m) J(m);
///   J(p) = J(u) + sigma mu_s W_s (2 J(x~) - J(x));  J(u) = Pi(p) J(p).
void shadow_band_update(const ShadowBandSlice& band, std::span<const double> m,
                        std::span<const double> p,
                        std::span<const double> probe,
                        std::span<const double> jt, const BandOperator& op,
                        const SpatialAnalysis& spatial,
                        const SolverParams& params);

/// J(t) = mu_lambda W_l^T J(v) for every pixel.
void shadow_update_feedback(ShadowState& shadow,
                            const SpectralAnalysis& spectral, double mu_lambda,
                            const WorkerPool& pool);

/// Derivative of master_update:
///   J(v~) = J(v) + sigma mu_lambda W_l (2 J(x~) - J(x));  J(v) = Pi(v~) J(v~).
void shadow_master_update(ShadowState& shadow, const SolverState& state,
                          const SpectralAnalysis& spectral,
                          const SolverParams& params, const WorkerPool& pool);

/// Shadow of the iterate muffin_iterate just performed on `state`; must be
/// called exactly once after each solver iterate, with the same params.
void shadow_iterate(ShadowState& shadow, const SolverState& state,
                    const Problem& problem, const SolverParams& params,
                    const WorkerPool& pool);

struct RiskReport {
  std::vector<double> per_band;  ///< PSURE_l
  double total = 0.0;            ///< sum of per_band, ascending band order
  double wmse_hat = 0.0;         ///< total / (L N)
  std::size_t iteration = 0;
};

/// PSURE_l = ||y_l - H_l x_l||^2 + 2 s_l^2 <e_l, H_l J_e(x_l)> - N s_l^2,
/// where s_l^2 is the band's noise variance.
RiskReport psure_evaluate(const ImageCube& estimate,
                          const ImageCube& jacobian_probe,
                          const ImageCube& dirty, const PsfSet& psfs,
                          const NoiseModel& noise, const ImageCube& probe,
                          const WorkerPool& pool, std::size_t iteration = 0);

/// PSURE of the solver's current estimate x_tilde.
RiskReport psure_evaluate(const SolverState& state, const ShadowState& shadow,
                          const Problem& problem, const NoiseModel& noise,
                          const WorkerPool& pool);

using LinearMap =
    std::function<void(std::span<const double>, std::span<double>)>;

/// e^T A e.
double hutchinson_trace(const LinearMap& matvec, std::span<const double> e);

}  // namespace muffin
