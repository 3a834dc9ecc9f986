#include <cmath>
#include <functional>
#include <numbers>

#include "doctest.h"
#include "muffin/transforms.hpp"
#include "support.hpp"

using namespace muffin;
using testing::Dot;
using testing::MaxAbs;
using testing::MaxAbsDiff;
using testing::RandomPlane;

namespace {

// Straight from the definition: C[k][l] = a_k cos(pi (2l + 1) k / 2L).
std::vector<double> DctMatrix(std::size_t L) {
  std::vector<double> c(L * L);
  for (std::size_t k = 0; k < L; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / L) : std::sqrt(2.0 / L);
    for (std::size_t l = 0; l < L; ++l) {
      c[k * L + l] = a * std::cos(std::numbers::pi * (2.0 * l + 1.0) * k / (2.0 * L));
    }
  }
  return c;
}

double PowerIteration(const std::function<Plane(const Plane&)>& normal_op,
                      std::size_t n, std::uint64_t seed) {
  Plane x = RandomPlane(n, seed);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double norm = std::sqrt(testing::Norm2(x));
    for (double& v : x) v /= norm;
    Plane y = normal_op(x);
    lambda = Dot(x, y);
    x = std::move(y);
  }
  return lambda;
}

}  // namespace

TEST_SUITE("transforms") {

TEST_CASE("Daubechies filters") {
  for (int order = 1; order <= 8; ++order) {
    const auto h = daubechies_filter(order);
    REQUIRE(h.size() == std::size_t(2 * order));
    double sum = 0.0;
    for (double v : h) sum += v;
    CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    // Orthonormal to even shifts.
    for (std::size_t shift = 0; shift < h.size(); shift += 2) {
      double s = 0.0;
      for (std::size_t k = 0; k + shift < h.size(); ++k) s += h[k] * h[k + shift];
      CHECK(s == doctest::Approx(shift == 0 ? 1.0 : 0.0).epsilon(1e-14).scale(1.0));
    }
    // Vanishing moments of the highpass filter.
    for (int p = 0; p < order; ++p) {
      double moment = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        const double g = (k % 2 == 0 ? 1.0 : -1.0) * h[h.size() - 1 - k];
        moment += g * std::pow(double(k), p);
      }
      CHECK(std::abs(moment) < 1e-9 * std::pow(double(h.size()), p));
    }
  }
  CHECK_THROWS_AS(daubechies_filter(0), ConfigError);
  CHECK_THROWS_AS(daubechies_filter(9), ConfigError);
  // db2 published values.
  const auto db2 = daubechies_filter(2);
  CHECK(db2[0] == doctest::Approx(0.48296291314453414).epsilon(1e-15));
  CHECK(db2[3] == doctest::Approx(-0.12940952255126037).epsilon(1e-15));
}

TEST_CASE("each basis is orthonormal") {
  const Grid grid{16, 8};
  for (int order = 1; order <= 8; ++order) {
    const WaveletBasis basis(grid, order, 2);
    const Plane img = RandomPlane(grid.pixels(), order);
    Plane coeffs(grid.pixels()), back(grid.pixels());
    basis.analyze(img, coeffs);
    basis.synthesize(coeffs, back);
    CHECK(MaxAbsDiff(back, img) < 1e-10);
    CHECK(testing::Norm2(coeffs) == doctest::Approx(testing::Norm2(img)).epsilon(1e-12));
  }
}

TEST_CASE("constant image has no Haar detail") {
  const Grid grid{8, 8};
  const WaveletBasis haar(grid, 1, 3);
  Plane coeffs(grid.pixels());
  haar.analyze(Plane(grid.pixels(), 2.5), coeffs);
  CHECK(coeffs[0] == doctest::Approx(2.5 * 8));
  for (std::size_t i = 1; i < coeffs.size(); ++i) CHECK(std::abs(coeffs[i]) < 1e-12);
}

TEST_CASE("2x2 Haar matches the closed form") {
  const WaveletBasis haar(Grid{2, 2}, 1, 1);
  const Plane img{1.0, 2.0, 3.0, 5.0};
  Plane c(4);
  haar.analyze(img, c);
  CHECK(c[0] == doctest::Approx((1 + 2 + 3 + 5) / 2.0));
  CHECK(c[1] == doctest::Approx((1 - 2 + 3 - 5) / 2.0));
  CHECK(c[2] == doctest::Approx((1 + 2 - 3 - 5) / 2.0));
  CHECK(c[3] == doctest::Approx((1 - 2 - 3 + 5) / 2.0));
}

TEST_CASE("union of eight bases is a tight frame") {
  for (const Grid grid : {Grid{16, 16}, Grid{32, 32}, Grid{32, 16}}) {
    const SpatialAnalysis ws(grid);
    CHECK(ws.basis_count() == 8);
    CHECK(ws.norm_squared() == 8.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Plane img = RandomPlane(grid.pixels(), 100 + seed);
      const auto coeffs = ws.analyze(img);
      CHECK(testing::Norm2(coeffs) ==
            doctest::Approx(8.0 * testing::Norm2(img)).epsilon(1e-10));
      Plane expected(img);
      for (double& v : expected) v *= 8.0;
      CHECK(MaxAbsDiff(ws.adjoint(coeffs), expected) <= 1e-10 * MaxAbs(expected));
    }
  }
}

TEST_CASE("spatial adjoint identity") {
  const Grid grid{16, 16};
  const SpatialAnalysis ws(grid);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Plane x = RandomPlane(grid.pixels(), 200 + seed);
    const Plane u = RandomPlane(grid.pixels() * 8, 300 + seed);
    const double lhs = Dot(ws.analyze(x), u);
    const double rhs = Dot(x, ws.adjoint(u));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }
  CHECK(MaxAbs(ws.adjoint(std::vector<double>(grid.pixels() * 8, 0.0))) == 0.0);
}

TEST_CASE("spatial transform rejects bad shapes") {
  CHECK_THROWS_AS(SpatialAnalysis(Grid{12, 16}), DimensionError);
  CHECK_THROWS_AS(WaveletBasis(Grid{8, 8}, 2, 4), DimensionError);
  const SpatialAnalysis ws(Grid{8, 8});
  CHECK_THROWS_AS(ws.analyze(Plane(63)), DimensionError);
  CHECK_THROWS_AS(ws.adjoint(Plane(64)), DimensionError);
}

TEST_CASE("default depth") {
  CHECK(SpatialAnalysis::default_depth(Grid{256, 256}) == 6);
  CHECK(SpatialAnalysis::default_depth(Grid{32, 32}) == 3);
  CHECK(SpatialAnalysis::default_depth(Grid{16, 64}) == 2);
  CHECK(SpatialAnalysis::default_depth(Grid{4, 4}) == 1);
}

TEST_CASE("spectral transform matches the explicit DCT-II matrix") {
  for (std::size_t L : {1u, 3u, 4u, 7u}) {
    const SpectralAnalysis wl(L);
    const auto c = DctMatrix(L);
    const Plane s = RandomPlane(L, L);
    const auto out = wl.analyze(s);
    for (std::size_t k = 0; k < L; ++k) {
      double expected = 0.0;
      for (std::size_t l = 0; l < L; ++l) expected += c[k * L + l] * s[l];
      CHECK(std::abs(out[k] - expected) < 1e-12);
    }
    // Transpose for the adjoint.
    const Plane q = RandomPlane(L, 50 + L);
    const auto back = wl.adjoint(q);
    for (std::size_t l = 0; l < L; ++l) {
      double expected = 0.0;
      for (std::size_t k = 0; k < L; ++k) expected += c[k * L + l] * q[k];
      CHECK(std::abs(back[l] - expected) < 1e-12);
    }
  }
}

TEST_CASE("spectral transform is orthonormal") {
  const std::size_t L = 6;
  const SpectralAnalysis wl(L);
  const Plane s = RandomPlane(L, 1);
  const auto c = wl.analyze(s);
  CHECK(std::sqrt(testing::Norm2(c)) == doctest::Approx(std::sqrt(testing::Norm2(s))).epsilon(1e-12));
  CHECK(MaxAbsDiff(wl.adjoint(c), s) < 1e-12);
  CHECK(MaxAbsDiff(wl.analyze(wl.adjoint(s)), s) < 1e-12);

  const auto dc = wl.analyze(Plane(L, 3.0));
  CHECK(dc[0] == doctest::Approx(std::sqrt(double(L)) * 3.0));
  for (std::size_t k = 1; k < L; ++k) CHECK(std::abs(dc[k]) < 1e-12);
  CHECK_THROWS_AS(wl.analyze(Plane(L + 1)), DimensionError);
  CHECK_THROWS_AS(wl.adjoint(Plane(L - 1)), DimensionError);
}

TEST_CASE("pixel-wise spectral transform over ranges") {
  const std::size_t L = 4, pixels = 10;
  const SpectralAnalysis wl(L);
  const Plane in = RandomPlane(L * pixels, 3);
  Plane out(L * pixels, -7.0);
  wl.analyze_pixels(in, out, pixels, 0, 6);
  wl.analyze_pixels(in, out, pixels, 6, pixels);
  for (std::size_t n = 0; n < pixels; ++n) {
    Plane s(L);
    for (std::size_t l = 0; l < L; ++l) s[l] = in[l * pixels + n];
    const auto c = wl.analyze(s);
    for (std::size_t k = 0; k < L; ++k) CHECK(out[k * pixels + n] == doctest::Approx(c[k]));
  }
  Plane back(L * pixels);
  wl.adjoint_pixels(out, back, pixels, 0, pixels);
  CHECK(MaxAbsDiff(back, in) < 1e-12);
}

TEST_CASE("norm certificates agree with power iteration") {
  const Grid grid{16, 16};
  const SpatialAnalysis ws(grid);
  const double spatial = PowerIteration(
      [&](const Plane& x) { return ws.adjoint(ws.analyze(x)); }, grid.pixels(), 1);
  CHECK(std::abs(spatial - ws.norm_squared()) < 1e-6);
  const SpectralAnalysis wl(5);
  const double spectral = PowerIteration(
      [&](const Plane& x) { return wl.adjoint(wl.analyze(x)); }, 5, 2);
  CHECK(std::abs(spectral - wl.norm_squared()) < 1e-6);
}

}
