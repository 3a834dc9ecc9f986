#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "muffin/cube.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace muffin;

namespace {

fs::path TempPath(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "muffin_cube_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void WriteBytes(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

CubeErrc ReadError(const fs::path& path) {
  try {
    cube_read(path);
  } catch (const CubeError& e) {
    return e.code();
  }
  FAIL("cube_read accepted a bad file");
  return CubeErrc::kIo;
}

}  // namespace

TEST_SUITE("cube") {

TEST_CASE("plane-major layout") {
  ImageCube cube(Grid{3, 2}, 4);
  for (std::size_t l = 0; l < 4; ++l) {
    for (std::size_t n = 0; n < 6; ++n) cube.at(n, l) = double(l * 6 + n);
  }
  for (std::size_t i = 0; i < cube.size(); ++i) CHECK(cube.data()[i] == double(i));
  CHECK(cube.plane(2)[5] == 17.0);
  CHECK(cube.wavelengths() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("constructor validates sizes") {
  CHECK_THROWS_AS(ImageCube(Grid{2, 2}, 1, std::vector<double>(3), {}), DimensionError);
  CHECK_THROWS_AS(ImageCube(Grid{2, 2}, 2, std::vector<double>(8), {1.0}), DimensionError);
}

TEST_CASE("write then read is bitwise identity") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ImageCube cube = testing::RandomCube(Grid{5, 3}, 3, seed, -1e6, 1e6);
    cube.data()[0] = -0.0;
    cube.data()[1] = std::numeric_limits<double>::denorm_min();
    const auto path = TempPath("roundtrip.cube");
    cube_write(cube, path);
    const ImageCube back = cube_read(path);
    CHECK(back.grid() == cube.grid());
    CHECK(back.wavelengths() == cube.wavelengths());
    CHECK(std::memcmp(back.data().data(), cube.data().data(),
                      cube.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("zero cube bytes") {
  const ImageCube cube(Grid{4, 4}, 2, {0.5, 1.5});
  const auto path = TempPath("zero.cube");
  cube_write(cube, path);
  const std::string header =
      "{\"w\":4,\"h\":4,\"l\":2,\"dtype\":\"f64le\",\"wavelengths\":[0.5,1.5]}\n";
  CHECK(cube_header(cube) == header);
  const std::string bytes = ReadBytes(path);
  REQUIRE(bytes.size() == header.size() + 32 * 8);
  CHECK(bytes.substr(0, header.size()) == header);
  CHECK(bytes.substr(header.size()) == std::string(32 * 8, '\0'));
}

TEST_CASE("payload is little-endian float64") {
  ImageCube cube(Grid{1, 1}, 1);
  cube.data()[0] = 1.0;
  const auto path = TempPath("one.cube");
  cube_write(cube, path);
  const std::string bytes = ReadBytes(path);
  const std::string payload = bytes.substr(bytes.size() - 8);
  CHECK(payload == std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
}

TEST_CASE("equal cubes give equal bytes") {
  const ImageCube cube = testing::RandomCube(Grid{4, 2}, 2, 9);
  cube_write(cube, TempPath("a.cube"));
  cube_write(ImageCube(cube), TempPath("b.cube"));
  CHECK(ReadBytes(TempPath("a.cube")) == ReadBytes(TempPath("b.cube")));
}

TEST_CASE("non-finite values are rejected on write") {
  ImageCube cube(Grid{2, 2}, 1);
  cube.data()[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(cube.all_finite());
  try {
    cube_write(cube, TempPath("nan.cube"));
    FAIL("NaN cube written");
  } catch (const CubeError& e) {
    CHECK(e.code() == CubeErrc::kNonFinite);
  }
}

TEST_CASE("read errors have distinct codes") {
  const auto path = TempPath("bad.cube");
  SUBCASE("payload size mismatch") {
    std::string bytes = "{\"w\":2,\"h\":2,\"l\":1,\"dtype\":\"f64le\",\"wavelengths\":[1]}\n";
    bytes += std::string(3 * 8, '\0');
    WriteBytes(path, bytes);
    CHECK(ReadError(path) == CubeErrc::kSizeMismatch);
  }
  SUBCASE("malformed header") {
    WriteBytes(path, "{\"w\":2,\"h\":2\n" + std::string(32, '\0'));
    CHECK(ReadError(path) == CubeErrc::kMalformedHeader);
    WriteBytes(path, "{\"w\":2,\"h\":2,\"l\":1,\"dtype\":\"f32le\",\"wavelengths\":[1]}\n" +
                         std::string(32, '\0'));
    CHECK(ReadError(path) == CubeErrc::kMalformedHeader);
    WriteBytes(path, "no newline at all");
    CHECK(ReadError(path) == CubeErrc::kMalformedHeader);
  }
  SUBCASE("non-finite payload") {
    std::string bytes = "{\"w\":1,\"h\":1,\"l\":1,\"dtype\":\"f64le\",\"wavelengths\":[1]}\n";
    bytes += std::string("\x00\x00\x00\x00\x00\x00\xf0\x7f", 8);  // +inf
    WriteBytes(path, bytes);
    CHECK(ReadError(path) == CubeErrc::kNonFinite);
  }
  SUBCASE("missing file") {
    CHECK(ReadError(TempPath("does_not_exist.cube")) == CubeErrc::kIo);
  }
}

TEST_CASE("coefficient cube layout") {
  CoefficientCube c(Grid{2, 2}, 3, 2);
  CHECK(c.size() == 24);
  CHECK(c.band_size() == 12);
  c.band(1)[0] = 7.0;
  CHECK(c.data()[12] == 7.0);
}

TEST_CASE("noise model validation") {
  CHECK_NOTHROW(NoiseModel::uniform(3, 0.5).validate(3));
  CHECK_THROWS_AS(NoiseModel::uniform(2, 0.5).validate(3), ConfigError);
  CHECK_THROWS_AS(NoiseModel::uniform(3, 0.0).validate(3), ConfigError);
  CHECK_THROWS_AS((NoiseModel{{1.0, std::nan("")}}).validate(2), ConfigError);
}

}
