#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "muffin/cube.hpp"
#include "muffin/metrics.hpp"
#include "muffin/parallel.hpp"
#include "muffin/psure.hpp"
#include "muffin/solver.hpp"

namespace muffin {

/// Closed interval [lo, hi] searched down to an absolute bracket width.
struct SearchInterval {
  double lo = 0.0;
  double hi = 1.0;
  double tolerance = 1e-2;

  /// Tolerance = rel * (hi - lo); a collapsed interval gets a tiny positive
  /// tolerance.
  static SearchInterval relative(double lo, double hi, double rel = 1e-2);
  void validate() const;
};

struct GoldenResult {
  double argmin = 0.0;     ///< midpoint of the final bracket
  double min_value = 0.0;  ///< f(argmin)
  std::size_t evaluations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

/// Golden-section minimization. Contracts the bracket by the golden ratio
/// conjugate per evaluation until its width is <= tolerance, then evaluates
/// the midpoint. A NaN from f aborts with NumericalError; +infinity is a
/// valid (worst) score.
GoldenResult golden_section(const std::function<double(double)>& f,
                            const SearchInterval& interval);

/// 2 + ceil(log((hi - lo) / tol) / log(1 / rho)).
std::size_t golden_evaluation_bound(const SearchInterval& interval);

enum class TunedParameter { kSpatial, kSpectral };

/// Solver variables, Jacobian shadow (when PSURE is tracked) and the
/// parameters currently in force.
struct TunerState {
  SolverState solver;
  std::optional<ShadowState> shadow;
  SolverParams params;

  static TunerState start(const Problem& problem, const SolverParams& params,
                          std::optional<std::uint64_t> probe_seed);
};

/// One solver iterate plus its shadow iterate.
void advance(TunerState& state, const Problem& problem, const WorkerPool& pool);

struct TrialRecord {
  std::size_t iteration = 0;
  int phase = 0;
  double mu = 0.0;
  double psure = 0.0;
  bool committed = false;
};

struct GreedyStep {
  double mu = 0.0;
  RiskReport report;
  std::vector<TrialRecord> trials;
  std::size_t golden_evaluations = 0;
};

/// Greedy parameter update. Every candidate value starts from a copy of the
/// same snapshot, runs `lookahead` iterates and is scored by the PSURE after
/// the last. Candidates come from a golden-section search on the interval
/// plus its two endpoints; the best one's first iterate is committed to
/// `state` and the others are discarded.
GreedyStep greedy_step(TunerState& state, TunedParameter which,
                       const SearchInterval& interval, const Problem& problem,
                       const NoiseModel& noise, const WorkerPool& pool,
                       std::size_t lookahead = 1);

/// Per-phase stopping rule: the iteration budget always applies; with
/// kRelativeChange a phase also ends once |dPSURE| / |PSURE| < threshold for
/// `window` consecutive iterations.
struct StopRule {
  enum class Kind { kBudget, kRelativeChange };
  Kind kind = Kind::kBudget;
  double threshold = 1e-5;
  std::size_t window = 10;
};

struct TuneSchedule {
  std::size_t phase1 = 100;  ///< tune mu_s, mu_lambda = 0
  std::size_t phase2 = 100;  ///< tune mu_lambda, mu_s frozen
  std::size_t phase3 = 500;  ///< both frozen
  StopRule stop;

  void validate() const;
  std::size_t total() const noexcept { return phase1 + phase2 + phase3; }
};

struct RunOptions {
  double tau = 1e-3;
  double sigma = 10.0;
  std::uint64_t probe_seed = 1;
  std::size_t lookahead = 1;
  /// Ground truth enables the wmse and snr columns.
  const ImageCube* truth = nullptr;
  /// Per-iteration rows (with cost) are skipped when false.
  bool record_rows = true;
  std::function<void(const MetricsRow&)> on_row;
  /// Called with the committed estimate after every iteration.
  std::function<void(std::size_t, const ImageCube&)> on_iterate;
};

struct RunResult {
  ImageCube estimate;
  double mu_s = 0.0;
  double mu_lambda = 0.0;
  std::vector<RiskReport> reports;
  std::vector<MetricsRow> rows;
  std::vector<TrialRecord> trials;
  std::size_t phase1_end = 0;  ///< last iteration of phase 1
  std::size_t phase2_end = 0;  ///< last iteration of phase 2
};

/// Self-tuned reconstruction: greedy mu_s search with mu_lambda = 0, then
/// greedy mu_lambda search with mu_s frozen, then fixed iterations.
RunResult self_tuned_run(const Problem& problem, const NoiseModel& noise,
                         const TuneSchedule& schedule,
                         const SearchInterval& mu_s_interval,
                         const SearchInterval& mu_lambda_interval,
                         const RunOptions& options, const WorkerPool& pool);

/// A block of iterations at fixed parameters.
struct Segment {
  std::size_t iterations = 0;
  double mu_s = 0.0;
  double mu_lambda = 0.0;
  int phase = 0;
};

/// Fixed-parameter reconstruction over consecutive segments. With a noise
/// model the Jacobian shadow runs too and PSURE is reported.
RunResult fixed_run(const Problem& problem, const NoiseModel* noise,
                    const std::vector<Segment>& segments,
                    const RunOptions& options, const WorkerPool& pool);

/// Continues `state` through the given segments; building block of
/// fixed_run exposed for prefix sharing in parameter sweeps.
void run_segments(TunerState& state, const Problem& problem,
                  const NoiseModel* noise, const std::vector<Segment>& segments,
                  const RunOptions& options, const WorkerPool& pool,
                  RunResult& result);

}  // namespace muffin
