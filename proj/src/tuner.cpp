#include "muffin/tuner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "muffin/error.hpp"

namespace muffin {

namespace {

constexpr double kInverseGolden = 0.6180339887498949;  // (sqrt(5) - 1) / 2

double CheckedEval(const std::function<double(double)>& f, double x) {
  const double value = f(x);
  if (std::isnan(value)) {
    throw NumericalError("objective is NaN at parameter " + std::to_string(x));
  }
  return value;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

// Tracks PSURE within a phase for the relative-change stopping rule.
class PhaseMonitor {
 public:
  explicit PhaseMonitor(const StopRule& rule) : rule_(rule) {}

  bool should_stop(double psure) {
    if (rule_.kind != StopRule::Kind::kRelativeChange) return false;
    if (!history_.empty()) {
      const double change = std::abs(psure - history_.back()) /
                            std::max(std::abs(psure), 1e-300);
      quiet_ = change < rule_.threshold ? quiet_ + 1 : 0;
    }
    history_.push_back(psure);
    return quiet_ >= rule_.window;
  }

 private:
  StopRule rule_;
  std::vector<double> history_;
  std::size_t quiet_ = 0;
};

void Record(RunResult& result, const TunerState& state, int phase,
            const std::optional<RiskReport>& report, const Problem& problem,
            const RunOptions& options, const WorkerPool& pool,
            const Stopwatch& clock) {
  if (report) result.reports.push_back(*report);
  if (options.on_iterate) {
    options.on_iterate(state.solver.iteration, state.solver.x_tilde);
  }
  if (!options.record_rows) return;
  MetricsRow row;
  row.iteration = state.solver.iteration;
  row.phase = phase;
  row.mu_s = state.params.mu_s;
  row.mu_lambda = state.params.mu_lambda;
  const ImageCube& estimate = state.solver.x_tilde;
  if (options.truth) {
    row.wmse = true_wmse(estimate, *options.truth, problem.psfs());
    row.snr_db = snr_db(estimate, *options.truth);
  }
  if (report) row.wmse_hat = report->wmse_hat;
  row.cost = cost(estimate, problem, state.params, pool);
  row.seconds = clock.seconds();
  if (options.on_row) options.on_row(row);
  result.rows.push_back(row);
}

}  // namespace

SearchInterval SearchInterval::relative(double lo, double hi, double rel) {
  const double width = hi - lo;
  return SearchInterval{lo, hi, width > 0.0 ? rel * width : 1e-12};
}

void SearchInterval::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw ConfigError("search interval needs finite lo <= hi");
  }
  if (!(tolerance > 0.0)) throw ConfigError("search tolerance must be > 0");
}

GoldenResult golden_section(const std::function<double(double)>& f,
                            const SearchInterval& interval) {
  interval.validate();
  double a = interval.lo;
  double b = interval.hi;
  GoldenResult result;
  if (b - a > interval.tolerance) {
    double c = b - kInverseGolden * (b - a);
    double d = a + kInverseGolden * (b - a);
    double fc = CheckedEval(f, c);
    double fd = CheckedEval(f, d);
    result.evaluations = 2;
    while (true) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        if (b - a <= interval.tolerance) break;
        c = b - kInverseGolden * (b - a);
        fc = CheckedEval(f, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        if (b - a <= interval.tolerance) break;
        d = a + kInverseGolden * (b - a);
        fd = CheckedEval(f, d);
      }
      ++result.evaluations;
    }
  }
  result.bracket_lo = a;
  result.bracket_hi = b;
  result.argmin = 0.5 * (a + b);
  result.min_value = CheckedEval(f, result.argmin);
  ++result.evaluations;
  return result;
}

std::size_t golden_evaluation_bound(const SearchInterval& interval) {
  const double width = interval.hi - interval.lo;
  if (width <= interval.tolerance) return 1;
  return 2 + static_cast<std::size_t>(std::ceil(
                 std::log(width / interval.tolerance) /
                 std::log(1.0 / kInverseGolden)));
}

TunerState TunerState::start(const Problem& problem,
                             const SolverParams& params,
                             std::optional<std::uint64_t> probe_seed) {
  params.validate();
  TunerState state{SolverState::cold_start(problem), std::nullopt, params};
  if (probe_seed) {
    state.shadow = ShadowState::zeros(
        problem,
        ProbeVector::rademacher(problem.grid(), problem.bands(), *probe_seed));
  }
  return state;
}

void advance(TunerState& state, const Problem& problem,
             const WorkerPool& pool) {
  muffin_iterate(state.solver, problem, state.params, pool);
  if (state.shadow) {
    shadow_iterate(*state.shadow, state.solver, problem, state.params, pool);
  }
}

GreedyStep greedy_step(TunerState& state, TunedParameter which,
                       const SearchInterval& interval, const Problem& problem,
                       const NoiseModel& noise, const WorkerPool& pool,
                       std::size_t lookahead) {
  if (!state.shadow) {
    throw ConfigError("greedy_step needs the Jacobian shadow (probe seed)");
  }
  if (lookahead == 0) throw ConfigError("lookahead must be >= 1");
  interval.validate();

  struct Trial {
    double mu = 0.0;
    double score = std::numeric_limits<double>::infinity();
    std::optional<TunerState> committed;
    RiskReport report;
    std::size_t record = 0;
  };

  const TunerState snapshot = state;
  const int phase = which == TunedParameter::kSpatial ? 1 : 2;
  GreedyStep step;

  auto run_trial = [&](double mu) {
    Trial trial;
    trial.mu = mu;
    try {
      TunerState s = snapshot;
      (which == TunedParameter::kSpatial ? s.params.mu_s : s.params.mu_lambda) =
          mu;
      advance(s, problem, pool);
      trial.report = psure_evaluate(s.solver, *s.shadow, problem, noise, pool);
      double score = trial.report.total;
      if (lookahead > 1) {
        trial.committed = s;
        for (std::size_t d = 1; d < lookahead; ++d) advance(s, problem, pool);
        score = psure_evaluate(s.solver, *s.shadow, problem, noise, pool).total;
      } else {
        trial.committed = std::move(s);
      }
      if (std::isfinite(score)) trial.score = score;
    } catch (const NumericalError&) {
      trial.committed.reset();
    }
    trial.record = step.trials.size();
    step.trials.push_back(TrialRecord{snapshot.solver.iteration + 1, phase, mu,
                                      trial.score, false});
    return trial;
  };

  // Every golden probe is itself a complete trial, so the winner is the
  // lowest score seen, not only the final midpoint.
  Trial best;
  auto consider = [&](Trial trial) {
    if (!best.committed || trial.score < best.score) best = std::move(trial);
  };
  const auto golden = golden_section(
      [&](double mu) {
        Trial trial = run_trial(mu);
        const double score = trial.score;
        consider(std::move(trial));
        return score;
      },
      interval);
  step.golden_evaluations = golden.evaluations;

  if (interval.hi - interval.lo > interval.tolerance) {
    for (double endpoint : {interval.lo, interval.hi}) consider(run_trial(endpoint));
  }
  if (!best.committed || !std::isfinite(best.score)) {
    throw NumericalError("every candidate diverged", std::nullopt,
                         snapshot.solver.iteration + 1);
  }

  step.trials[best.record].committed = true;
  step.mu = best.mu;
  step.report = best.report;
  state = std::move(*best.committed);
  return step;
}

void TuneSchedule::validate() const {
  if (phase1 == 0 || phase2 == 0 || phase3 == 0) {
    throw ConfigError("every phase budget must be at least 1 iteration");
  }
  if (stop.kind == StopRule::Kind::kRelativeChange &&
      (!(stop.threshold > 0.0) || stop.window == 0)) {
    throw ConfigError("relative stopping rule needs threshold > 0, window > 0");
  }
}

RunResult self_tuned_run(const Problem& problem, const NoiseModel& noise,
                         const TuneSchedule& schedule,
                         const SearchInterval& mu_s_interval,
                         const SearchInterval& mu_lambda_interval,
                         const RunOptions& options, const WorkerPool& pool) {
  schedule.validate();
  mu_s_interval.validate();
  mu_lambda_interval.validate();
  noise.validate(problem.bands());

  Stopwatch clock;
  RunResult result;
  TunerState state = TunerState::start(
      problem, SolverParams{0.0, 0.0, options.tau, options.sigma},
      options.probe_seed);

  const struct {
    int phase;
    std::size_t budget;
    std::optional<TunedParameter> tuned;
    const SearchInterval* interval;
  } phases[] = {
      {1, schedule.phase1, TunedParameter::kSpatial, &mu_s_interval},
      {2, schedule.phase2, TunedParameter::kSpectral, &mu_lambda_interval},
      {3, schedule.phase3, std::nullopt, nullptr},
  };

  for (const auto& phase : phases) {
    PhaseMonitor monitor(schedule.stop);
    for (std::size_t k = 0; k < phase.budget; ++k) {
      RiskReport report;
      if (phase.tuned) {
        GreedyStep step = greedy_step(state, *phase.tuned, *phase.interval,
                                      problem, noise, pool, options.lookahead);
        for (auto& trial : step.trials) {
          trial.phase = phase.phase;
          result.trials.push_back(trial);
        }
        report = std::move(step.report);
      } else {
        advance(state, problem, pool);
        report = psure_evaluate(state.solver, *state.shadow, problem, noise,
                                pool);
      }
      const double total = report.total;
      Record(result, state, phase.phase, report, problem, options, pool, clock);
      if (monitor.should_stop(total)) break;
    }
    if (phase.phase == 1) result.phase1_end = state.solver.iteration;
    if (phase.phase == 2) result.phase2_end = state.solver.iteration;
  }

  result.estimate = state.solver.x_tilde;
  result.mu_s = state.params.mu_s;
  result.mu_lambda = state.params.mu_lambda;
  return result;
}

void run_segments(TunerState& state, const Problem& problem,
                  const NoiseModel* noise, const std::vector<Segment>& segments,
                  const RunOptions& options, const WorkerPool& pool,
                  RunResult& result) {
  Stopwatch clock;
  const bool track_risk = noise != nullptr && state.shadow.has_value();
  for (const Segment& segment : segments) {
    state.params.mu_s = segment.mu_s;
    state.params.mu_lambda = segment.mu_lambda;
    state.params.validate();
    for (std::size_t k = 0; k < segment.iterations; ++k) {
      advance(state, problem, pool);
      std::optional<RiskReport> report;
      if (track_risk) {
        report = psure_evaluate(state.solver, *state.shadow, problem, *noise,
                                pool);
      }
      Record(result, state, segment.phase, report, problem, options, pool,
             clock);
    }
    if (segment.phase == 1) result.phase1_end = state.solver.iteration;
    if (segment.phase == 2) result.phase2_end = state.solver.iteration;
  }
  result.estimate = state.solver.x_tilde;
  result.mu_s = state.params.mu_s;
  result.mu_lambda = state.params.mu_lambda;
}

RunResult fixed_run(const Problem& problem, const NoiseModel* noise,
                    const std::vector<Segment>& segments,
                    const RunOptions& options, const WorkerPool& pool) {
  if (noise) noise->validate(problem.bands());
  SolverParams params{0.0, 0.0, options.tau, options.sigma};
  if (!segments.empty()) {
    params.mu_s = segments.front().mu_s;
    params.mu_lambda = segments.front().mu_lambda;
  }
  TunerState state = TunerState::start(
      problem, params,
      noise ? std::optional<std::uint64_t>(options.probe_seed) : std::nullopt);
  RunResult result;
  run_segments(state, problem, noise, segments, options, pool, result);
  return result;
}

}  // namespace muffin
