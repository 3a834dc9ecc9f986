#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "muffin/simulator.hpp"
#include "muffin/solver.hpp"
#include "muffin/tuner.hpp"

namespace muffin {

struct ExperimentPaths {
  std::filesystem::path dirty;
  std::filesystem::path psf;
  std::filesystem::path truth;     ///< optional
  std::filesystem::path manifest;  ///< optional source of noise variances
  std::filesystem::path output = ".";
};

struct IntervalConfig {
  double lo = 0.0;
  double hi = 1.0;
  double rel_tolerance = 1e-2;

  SearchInterval interval() const { return SearchInterval::relative(lo, hi, rel_tolerance); }
};

struct ExperimentConfig {
  ExperimentPaths paths;
  SimulationConfig simulation;
  bool full_scale = false;  ///< 256 x 256 x 100 dataset

  double mu_s = 0.0;
  double mu_lambda = 0.0;
  double tau = 1e-3;
  double sigma = 10.0;
  StepMode step = StepMode::kFixed;

  bool self_tune = false;
  TuneSchedule schedule;
  IntervalConfig mu_s_interval{0.0, 2.0, 1e-2};
  IntervalConfig mu_lambda_interval{0.0, 3.0, 1e-2};
  std::size_t lookahead = 1;

  std::vector<double> noise_variances;  ///< empty: take from the manifest
  std::uint64_t probe_seed = 7;
  std::optional<std::size_t> workers;  ///< unset: min(L, cores)
  std::size_t snapshot_every = 0;      ///< 0: no iterate snapshots

  /// Derives every generator seed from one master seed.
  void apply_seed(std::uint64_t seed);
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// JSON text with the same nesting as to_json; missing fields keep their
/// defaults, unknown fields are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

/// Files produced by a command, keyed by role.
struct CommandOutput {
  std::vector<std::pair<std::string, std::filesystem::path>> files;
  std::vector<std::string> warnings;
};

/// sky.cube, psf.cube, dirty.cube and manifest.json in paths.output.
CommandOutput cmd_simulate(const ExperimentConfig& config);

/// result.cube, metrics.csv, manifest.json, wmse.png, snr.png, plus
/// tuning.csv for self-tuned runs.
CommandOutput cmd_reconstruct(const ExperimentConfig& config);

/// Oracle search on true WMSE, then a replay at the chosen parameters:
/// gridsearch.csv, result.cube, metrics.csv, manifest.json, plots.
CommandOutput cmd_gridsearch(const ExperimentConfig& config);

/// Step size in force for a run whose weights may reach (mu_s, mu_lambda).
double resolve_tau(const ExperimentConfig& config, const Problem& problem,
                   double mu_s, double mu_lambda);

struct OracleEvaluation {
  int stage = 0;  ///< 1: mu_s, 2: mu_lambda
  double mu = 0.0;
  double wmse = 0.0;
};

struct OracleResult {
  double mu_s = 0.0;
  double mu_lambda = 0.0;
  GoldenResult spatial;
  GoldenResult spectral;
  std::vector<OracleEvaluation> evaluations;
};

/// Golden section over mu_s on the true WMSE after phase-1 iterations at
/// (mu_s, 0), then over mu_lambda on the true WMSE after the full schedule
/// (phase 1 at (mu_s, 0), phases 2 and 3 at (mu_s, mu_lambda)).
OracleResult oracle_search(const Problem& problem, const ImageCube& truth,
                           const TuneSchedule& schedule,
                           const SearchInterval& mu_s_interval,
                           const SearchInterval& mu_lambda_interval,
                           const RunOptions& options, const WorkerPool& pool);

struct GridSweep {
  std::vector<double> mu_s;
  std::vector<double> mu_lambda;
  std::vector<double> wmse;  ///< row-major [i_s * mu_lambda.size() + i_l]
  std::vector<double> snr_db;
  std::size_t best_s = 0;
  std::size_t best_lambda = 0;

  double best_wmse() const { return wmse[best_s * mu_lambda.size() + best_lambda]; }
  double best_snr_db() const { return snr_db[best_s * mu_lambda.size() + best_lambda]; }
};

/// Exhaustive version of the oracle protocol on a parameter grid. Phase-1
/// prefixes are shared across mu_lambda values.
GridSweep sweep_grid(const Problem& problem, const ImageCube& truth,
                     const TuneSchedule& schedule,
                     const std::vector<double>& mu_s_values,
                     const std::vector<double>& mu_lambda_values,
                     const RunOptions& options, const WorkerPool& pool);

/// n points evenly spaced over [lo, hi], endpoints included.
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace muffin
