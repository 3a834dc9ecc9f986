#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "muffin/cube.hpp"
#include "muffin/operators.hpp"
#include "muffin/parallel.hpp"
#include "muffin/transforms.hpp"

namespace muffin {

/// Regularization weights and primal/dual step sizes.
struct SolverParams {
  double mu_s = 0.0;       ///< spatial (wavelet) weight
  double mu_lambda = 0.0;  ///< spectral (cosine) weight
  double tau = 1e-3;       ///< primal step
  double sigma = 10.0;     ///< dual step

  void validate() const;
};

enum class StepMode {
  kFixed,  ///< use tau as given
  kAuto,   ///< derive tau from the convergence certificate
};

/// tau * (beta / 2 + sigma * (mu_s^2 * B + mu_lambda^2)); the iteration is
/// guaranteed to converge when this is <= 1.
double convergence_certificate(const SolverParams& params, double beta,
                               std::size_t basis_count);

/// The tau that puts the certificate at `target` (< 1).
double auto_tau(double beta, double sigma, double mu_s, double mu_lambda,
                std::size_t basis_count, double target = 0.9);

/// Immutable inputs of a reconstruction: dirty cube, per-band operators and
/// the two analysis transforms.
class Problem {
 public:
  Problem(ImageCube dirty, const ImageCube& psf_cube);
  Problem(ImageCube dirty, const ImageCube& psf_cube, SpatialAnalysis spatial);

  const ImageCube& dirty() const noexcept { return dirty_; }
  const PsfSet& psfs() const noexcept { return psfs_; }
  const SpatialAnalysis& spatial() const noexcept { return spatial_; }
  const SpectralAnalysis& spectral() const noexcept { return spectral_; }
  Grid grid() const noexcept { return dirty_.grid(); }
  std::size_t bands() const noexcept { return dirty_.bands(); }
  std::size_t pixels() const noexcept { return dirty_.pixels(); }

 private:
  ImageCube dirty_;
  PsfSet psfs_;
  SpatialAnalysis spatial_;
  SpectralAnalysis spectral_;
};

/// Primal and dual variables of the primal-dual iteration.
///
/// `m`, `p` and `v_tilde` hold the pre-projection / pre-saturation values of
/// the most recent iterate. The Jacobian shadow takes its masks from them.
struct SolverState {
  ImageCube x;        ///< committed primal (previous x_tilde)
  ImageCube x_tilde;  ///< projected primal, always >= 0
  ImageCube t;        ///< spectral feedback mu_lambda * W_l^T v
  ImageCube m;
  CoefficientCube u;  ///< spatial dual, in [-1, 1]
  CoefficientCube p;
  CoefficientCube v;  ///< spectral dual, in [-1, 1]
  CoefficientCube v_tilde;
  std::size_t iteration = 0;

  /// x = x_tilde = 0, u = v = 0, t = 0.
  static SolverState cold_start(const Problem& problem);
};

/// Elementwise clamp to [-1, 1].
void sat(std::span<double> values);
std::vector<double> sat(std::span<const double> values);

/// Elementwise max(., 0).
void project_positive(std::span<double> values);
Plane project_positive(std::span<const double> values);

/// Views of one band's slices of a SolverState.
struct BandSlice {
  std::span<double> x;
  std::span<double> x_tilde;
  std::span<double> u;
  std::span<double> m;
  std::span<double> p;
};

BandSlice band_slice(SolverState& state, std::size_t band);

/// Worker step for one band:
///   x <- x_tilde;  grad = H^T (H x - y);  s = mu_s W_s^T u;
///   m = x - tau (grad + s + t);  x_tilde = (m)_+;
///   p = u + sigma mu_s W_s (2 x_tilde - x);  u = sat(p).
void band_update(const BandSlice& band, std::span<const double> t,
                 std::span<const double> y, const BandOperator& op,
                 const SpatialAnalysis& spatial, const SolverParams& params);

/// t = mu_lambda * W_l^T v for every pixel.
void update_feedback(SolverState& state, const SpectralAnalysis& spectral,
                     double mu_lambda, const WorkerPool& pool);

/// Master step, per pixel n: v_tilde = v + sigma mu_lambda W_l (2 x_tilde - x),
/// v = sat(v_tilde). The feedback t for the next iterate is recomputed by
/// muffin_iterate from the parameters in force at that time.
void master_update(SolverState& state, const SpectralAnalysis& spectral,
                   const SolverParams& params, const WorkerPool& pool);

/// One full iterate: feedback, all band updates (concurrently), master
/// update. Increments state.iteration. Throws NumericalError on a
/// non-finite iterate.
void muffin_iterate(SolverState& state, const Problem& problem,
                    const SolverParams& params, const WorkerPool& pool);

/// Objective evaluated at a candidate estimate:
///   sum_l 0.5 ||y_l - H_l x_l||^2 + mu_s sum_l ||W_s x_l||_1
///   + mu_lambda sum_n ||W_l x^n||_1,
/// or +infinity when any entry is negative. Band terms are summed in
/// ascending band order.
double cost(const ImageCube& estimate, const Problem& problem,
            const SolverParams& params, const WorkerPool& pool);

/// Pixel ranges used for the per-pixel phases; fixed so results do not
/// depend on the worker count.
inline constexpr std::size_t kPixelChunk = 4096;

}  // namespace muffin
