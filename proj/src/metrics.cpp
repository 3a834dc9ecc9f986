#include "muffin/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "muffin/error.hpp"

namespace muffin {

namespace {

std::string Number(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

std::string Optional(const std::optional<double>& value, bool decibels) {
  if (!value) return "";
  if (decibels && !(*value > 0.0)) return "";
  return Number(decibels ? to_db(*value) : *value);
}

}  // namespace

double true_wmse(const ImageCube& estimate, const ImageCube& truth,
                 const PsfSet& psfs) {
  if (!estimate.same_shape(truth) || psfs.bands() != truth.bands() ||
      psfs.grid() != truth.grid()) {
    throw DimensionError("true_wmse: shapes differ");
  }
  const std::size_t pixels = truth.pixels();
  double total = 0.0;
  Plane diff(pixels);
  for (std::size_t l = 0; l < truth.bands(); ++l) {
    const auto x = estimate.plane(l);
    const auto ref = truth.plane(l);
    for (std::size_t i = 0; i < pixels; ++i) diff[i] = x[i] - ref[i];
    for (double v : psfs[l].apply(diff)) total += v * v;
  }
  return total / static_cast<double>(pixels * truth.bands());
}

double snr_db(const ImageCube& estimate, const ImageCube& truth) {
  if (!estimate.same_shape(truth)) throw DimensionError("snr_db: shapes differ");
  const auto x = estimate.data();
  const auto ref = truth.data();
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    signal += ref[i] * ref[i];
    const double d = x[i] - ref[i];
    error += d * d;
  }
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

double to_db(double value) {
  if (value < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (value == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(value);
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const MetricsRow& row = rows[k];
    if (k > 0 && row.iteration <= rows[k - 1].iteration) {
      throw ConfigError("metrics rows must have increasing iterations");
    }
    out += std::to_string(row.iteration) + "," + std::to_string(row.phase) +
           "," + Number(row.mu_s) + "," + Number(row.mu_lambda) + "," +
           Optional(row.wmse, true) + "," + Optional(row.wmse_hat, true) +
           "," + Optional(row.snr_db, false) + "," +
           Optional(row.cost, false) + "," + Number(row.seconds) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricsRow>& rows) {
  const std::string text = format_metrics_csv(rows);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace muffin
