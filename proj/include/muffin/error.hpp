#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace muffin {

/// Broad failure categories; the CLI maps each one to its own exit code.
enum class ErrorKind {
  kConfig,
  kIo,
  kDimension,
  kNumerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::kDimension, what) {}
};

/// A non-finite value or a diverging iterate. Carries the band and/or
/// iteration where it was detected when those are known.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what,
                          std::optional<std::size_t> band = std::nullopt,
                          std::optional<std::size_t> iteration = std::nullopt)
      : Error(ErrorKind::kNumerical, Decorate(what, band, iteration)),
        band_(band),
        iteration_(iteration) {}

  std::optional<std::size_t> band() const noexcept { return band_; }
  std::optional<std::size_t> iteration() const noexcept { return iteration_; }

 private:
  static std::string Decorate(const std::string& what,
                              std::optional<std::size_t> band,
                              std::optional<std::size_t> iteration) {
    std::string out = what;
    if (band) out += " (band " + std::to_string(*band) + ")";
    if (iteration) out += " (iteration " + std::to_string(*iteration) + ")";
    return out;
  }

  std::optional<std::size_t> band_;
  std::optional<std::size_t> iteration_;
};

}  // namespace muffin
