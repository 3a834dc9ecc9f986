#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "muffin/cube.hpp"
#include "muffin/operators.hpp"

namespace muffin {

/// (1 / LN) sum_l ||H_l (x_l - x*_l)||^2.
double true_wmse(const ImageCube& estimate, const ImageCube& truth,
                 const PsfSet& psfs);

/// 10 log10(||X*||^2 / ||X - X*||^2); +infinity when X == X*.
double snr_db(const ImageCube& estimate, const ImageCube& truth);

/// 10 log10(value) for value > 0; -infinity for 0, NaN for negative input.
double to_db(double value);

/// One row of the per-iteration trace. Quantities are linear; dB happens in
/// the CSV writer.
struct MetricsRow {
  std::size_t iteration = 0;
  int phase = 0;
  double mu_s = 0.0;
  double mu_lambda = 0.0;
  std::optional<double> wmse;      ///< needs ground truth
  std::optional<double> wmse_hat;  ///< needs a noise model
  std::optional<double> snr_db;    ///< needs ground truth
  std::optional<double> cost;
  double seconds = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "iter,phase,mu_s,mu_lambda,wmse_db,wmse_hat_db,snr_db,cost,seconds";

/// Header plus one line per row; absent values are left blank. Throws
/// ConfigError when iterations are not strictly increasing.
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows);

}  // namespace muffin
