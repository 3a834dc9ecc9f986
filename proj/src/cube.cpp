#include "muffin/cube.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace muffin {

namespace {

std::vector<double> DefaultWavelengths(std::size_t bands) {
  std::vector<double> out(bands);
  for (std::size_t l = 0; l < bands; ++l) out[l] = static_cast<double>(l + 1);
  return out;
}

std::uint64_t ToLittleEndian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::little) {
    return bits;
  } else {
    return __builtin_bswap64(bits);
  }
}

}  // namespace

ImageCube::ImageCube(Grid grid, std::size_t bands,
                     std::vector<double> wavelengths)
    : ImageCube(grid, bands, std::vector<double>(grid.pixels() * bands, 0.0),
                std::move(wavelengths)) {}

ImageCube::ImageCube(Grid grid, std::size_t bands, std::vector<double> data,
                     std::vector<double> wavelengths)
    : grid_(grid),
      bands_(bands),
      wavelengths_(wavelengths.empty() ? DefaultWavelengths(bands)
                                       : std::move(wavelengths)),
      data_(std::move(data)) {
  if (data_.size() != grid_.pixels() * bands_) {
    throw DimensionError("cube data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(grid_.width) +
                         "x" + std::to_string(grid_.height) + "x" +
                         std::to_string(bands_));
  }
  if (wavelengths_.size() != bands_) {
    throw DimensionError("wavelength list has " +
                         std::to_string(wavelengths_.size()) +
                         " entries for " + std::to_string(bands_) + " bands");
  }
}

std::span<double> ImageCube::plane(std::size_t band) {
  return std::span<double>(data_).subspan(band * pixels(), pixels());
}

std::span<const double> ImageCube::plane(std::size_t band) const {
  return std::span<const double>(data_).subspan(band * pixels(), pixels());
}

bool ImageCube::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

CoefficientCube::CoefficientCube(Grid grid, std::size_t basis_count,
                                 std::size_t bands)
    : grid_(grid),
      basis_count_(basis_count),
      bands_(bands),
      data_(grid.pixels() * basis_count * bands, 0.0) {}

std::span<double> CoefficientCube::band(std::size_t l) {
  return std::span<double>(data_).subspan(l * band_size(), band_size());
}

std::span<const double> CoefficientCube::band(std::size_t l) const {
  return std::span<const double>(data_).subspan(l * band_size(), band_size());
}

void NoiseModel::validate(std::size_t bands) const {
  if (variances.size() != bands) {
    throw ConfigError("noise model has " + std::to_string(variances.size()) +
                      " variances for " + std::to_string(bands) + " bands");
  }
  for (std::size_t l = 0; l < bands; ++l) {
    if (!(variances[l] > 0.0) || !std::isfinite(variances[l])) {
      throw ConfigError("noise variance of band " + std::to_string(l) +
                        " must be positive and finite");
    }
  }
}

std::string cube_header(const ImageCube& cube) {
  nlohmann::ordered_json header;
  header["w"] = cube.width();
  header["h"] = cube.height();
  header["l"] = cube.bands();
  header["dtype"] = "f64le";
  header["wavelengths"] = cube.wavelengths();
  return header.dump() + "\n";
}

void cube_write(const ImageCube& cube, const std::filesystem::path& path) {
  if (!cube.all_finite()) {
    throw CubeError(CubeErrc::kNonFinite,
                    "refusing to write cube with non-finite values to " +
                        path.string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CubeError(CubeErrc::kIo, "cannot open " + path.string());
  }
  const std::string header = cube_header(cube);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::vector<char> payload(cube.size() * sizeof(double));
  const auto data = cube.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint64_t bits =
        ToLittleEndian(std::bit_cast<std::uint64_t>(data[i]));
    std::memcpy(payload.data() + i * sizeof(double), &bits, sizeof(bits));
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) {
    throw CubeError(CubeErrc::kIo, "write failed for " + path.string());
  }
}

ImageCube cube_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CubeError(CubeErrc::kIo, "cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || in.eof()) {
    throw CubeError(CubeErrc::kMalformedHeader,
                    "missing header line in " + path.string());
  }

  std::size_t width = 0, height = 0, bands = 0;
  std::vector<double> wavelengths;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("dtype").get<std::string>() != "f64le") {
      throw CubeError(CubeErrc::kMalformedHeader,
                      "unsupported dtype in " + path.string());
    }
    width = header.at("w").get<std::size_t>();
    height = header.at("h").get<std::size_t>();
    bands = header.at("l").get<std::size_t>();
    wavelengths = header.at("wavelengths").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw CubeError(CubeErrc::kMalformedHeader,
                    "bad header in " + path.string() + ": " + e.what());
  }
  if (width == 0 || height == 0 || bands == 0 ||
      wavelengths.size() != bands) {
    throw CubeError(CubeErrc::kMalformedHeader,
                    "inconsistent header dimensions in " + path.string());
  }

  const std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const std::size_t count = width * height * bands;
  if (payload.size() != count * sizeof(double)) {
    throw CubeError(CubeErrc::kSizeMismatch,
                    "payload of " + std::to_string(payload.size()) +
                        " bytes in " + path.string() + ", expected " +
                        std::to_string(count * sizeof(double)));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, payload.data() + i * sizeof(double), sizeof(bits));
    data[i] = std::bit_cast<double>(ToLittleEndian(bits));
    if (!std::isfinite(data[i])) {
      throw CubeError(CubeErrc::kNonFinite,
                      "non-finite value at offset " + std::to_string(i) +
                          " in " + path.string());
    }
  }
  return ImageCube(Grid{width, height}, bands, std::move(data),
                   std::move(wavelengths));
}

}  // namespace muffin
