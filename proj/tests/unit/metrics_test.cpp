#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "muffin/metrics.hpp"
#include "muffin/simulator.hpp"
#include "support.hpp"

using namespace muffin;

TEST_SUITE("metrics") {

TEST_CASE("true WMSE matches direct summation") {
  const Grid grid{6, 6};
  const std::size_t L = 3;
  const ImageCube psf = testing::RandomCube(grid, L, 1);
  const ImageCube x = testing::RandomCube(grid, L, 2), truth = testing::RandomCube(grid, L, 3);
  double total = 0;
  for (std::size_t l = 0; l < L; ++l) {
    Plane d(grid.pixels());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = x.plane(l)[i] - truth.plane(l)[i];
    total += testing::Norm2(testing::CircularConvolve(grid, psf.plane(l), d));
  }
  const PsfSet psfs(psf);
  CHECK(true_wmse(x, truth, psfs) == doctest::Approx(total / double(L * grid.pixels())).epsilon(1e-12));
  CHECK(true_wmse(truth, truth, psfs) == 0.0);
  CHECK_THROWS_AS(true_wmse(ImageCube(grid, 2), truth, psfs), DimensionError);
}

TEST_CASE("true WMSE is blind to the null space") {
  const Grid grid{16, 16};
  const std::size_t L = 3;
  const ImageCube psf = make_psf_cube(grid, L, 0.25, 5);
  const PsfSet psfs(psf);
  // Find a frequency no band measures; a cosine there is invisible.
  for (std::size_t ku = 0; ku < 16; ++ku) {
    for (std::size_t kv = 0; kv < 16; ++kv) {
      Plane wave(grid.pixels());
      for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c)
          wave[r * 16 + c] = std::cos(2 * std::numbers::pi * double(ku * r + kv * c) / 16.0);
      bool hidden = true;
      for (std::size_t l = 0; l < L && hidden; ++l)
        hidden = testing::MaxAbs(psfs[l].apply(wave)) < 1e-12;
      if (!hidden) continue;
      const ImageCube truth = testing::RandomCube(grid, L, 6);
      ImageCube x = truth;
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < wave.size(); ++i) x.plane(l)[i] += wave[i];
      CHECK(true_wmse(x, truth, psfs) <= 1e-24);
      CHECK(std::isfinite(snr_db(x, truth)));
      return;
    }
  }
  FAIL("no unmeasured frequency");
}

TEST_CASE("SNR") {
  const Grid grid{5, 5};
  const ImageCube truth = testing::RandomCube(grid, 2, 1);
  const ImageCube err = testing::RandomCube(grid, 2, 2);
  auto shifted = [&](double scale) {
    ImageCube x = truth;
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += scale * err.data()[i];
    return x;
  };
  const double base = snr_db(shifted(1.0), truth);
  const double oracle = 10 * std::log10(testing::Norm2(truth.data()) / testing::Norm2(err.data()));
  CHECK(base == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(snr_db(shifted(0.1), truth) - base == doctest::Approx(20.0).epsilon(1e-10));
  // Error as large as the signal gives 0 dB.
  ImageCube zero(grid, 2);
  CHECK(snr_db(zero, truth) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isinf(snr_db(truth, truth)));
  // Invariant to a common scale.
  ImageCube a = shifted(1.0), b = truth;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] *= 7;
    b.data()[i] *= 7;
  }
  CHECK(snr_db(a, b) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("decibels") {
  CHECK(to_db(100.0) == doctest::Approx(20.0));
  CHECK(to_db(0.0) == -std::numeric_limits<double>::infinity());
  CHECK(std::isnan(to_db(-1.0)));
}

TEST_CASE("metrics CSV") {
  MetricsRow full{1, 1, 0.5, 0.0, 0.01, 0.1, 12.5, 3.25, 0.125};
  MetricsRow sparse;
  sparse.iteration = 2;
  sparse.phase = 3;
  sparse.mu_s = 0.25;
  sparse.mu_lambda = 1.5;
  sparse.seconds = 1;
  const std::string csv = format_metrics_csv({full, sparse});
  std::istringstream lines(csv);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(header == "iter,phase,mu_s,mu_lambda,wmse_db,wmse_hat_db,snr_db,cost,seconds");
  CHECK(first == "1,1,0.5,0,-20,-10,12.5,3.25,0.125");
  CHECK(second == "2,3,0.25,1.5,,,,,1");
  CHECK_THROWS_AS(format_metrics_csv({sparse, full}), ConfigError);
  CHECK_THROWS_AS(format_metrics_csv({full, full}), ConfigError);
}

TEST_CASE("metrics CSV file") {
  const auto dir = std::filesystem::temp_directory_path() / "muffin_metrics_test";
  std::filesystem::create_directories(dir);
  const MetricsRow row{4, 2, 1, 2, std::nullopt, 0.5, std::nullopt, std::nullopt, 0};
  write_metrics_csv(dir / "m.csv", {row});
  std::ifstream in(dir / "m.csv");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == format_metrics_csv({row}));
  try {
    write_metrics_csv(dir / "missing" / "m.csv", {row});
    FAIL("wrote into a missing directory");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
  std::filesystem::remove_all(dir);
}

}
