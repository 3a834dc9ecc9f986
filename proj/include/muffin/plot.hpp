#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace muffin {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::uint32_t rgb = 0x1f77b4;
};

struct PlotOptions {
  unsigned width = 640;
  unsigned height = 400;
};

/// Renders line series onto a white RGB canvas with framed axes and numeric
/// tick labels and writes it as PNG. Non-finite points break the line.
/// Throws CubeError(kIo) when the file cannot be written.
void write_line_plot(const std::filesystem::path& path,
                     const std::vector<Series>& series,
                     const PlotOptions& options = {});

}  // namespace muffin
