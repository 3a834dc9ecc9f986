#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "muffin/experiment.hpp"
#include "muffin/metrics.hpp"
#include "support.hpp"

using namespace muffin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("muffin_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ExperimentConfig SmallConfig(const fs::path& out) {
  ExperimentConfig c;
  c.simulation.grid = {16, 16};
  c.simulation.bands = 3;
  c.paths.output = out;
  c.schedule = {3, 3, 4, {}};
  c.step = StepMode::kAuto;
  return c;
}

void Simulate(const fs::path& dir) {
  cmd_simulate(SmallConfig(dir));
}

std::string ConfigErrorText(const std::string& json) {
  try {
    parse_config(json).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config defaults") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c.tau == 1e-3);
  CHECK(c.sigma == 10.0);
  CHECK(c.schedule.phase1 == 100);
  CHECK(c.schedule.phase2 == 100);
  CHECK(c.schedule.phase3 == 500);
  CHECK(c.mu_s_interval.hi == 2.0);
  CHECK(c.mu_lambda_interval.hi == 3.0);
  CHECK(c.simulation.grid == Grid{32, 32});
  CHECK(c.simulation.bands == 4);
  CHECK(c.lookahead == 1);
  CHECK_FALSE(c.workers.has_value());
}

TEST_CASE("config round trip") {
  ExperimentConfig c = SmallConfig("out");
  c.mu_s = 0.4;
  c.mu_lambda = 1.25;
  c.self_tune = true;
  c.noise_variances = {0.5, 0.25, 0.125};
  c.simulation.snr_db = std::numeric_limits<double>::infinity();
  c.schedule.stop = {StopRule::Kind::kRelativeChange, 1e-4, 5};
  c.workers = 2;
  c.apply_seed(40);
  const ExperimentConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.simulation.sky_seed == 40);
  CHECK(back.simulation.psf_seed == 41);
  CHECK(back.simulation.noise_seed == 42);
  CHECK(back.probe_seed == 43);
  CHECK(std::isinf(back.simulation.snr_db));
  CHECK(back.step == StepMode::kAuto);
  CHECK(back.schedule.stop.kind == StopRule::Kind::kRelativeChange);
  CHECK(*back.workers == 2);
}

TEST_CASE("config errors name the field") {
  CHECK(ConfigErrorText(R"({"solver": {"mu_s": -1}})").find("solver.mu_s") != std::string::npos);
  CHECK(ConfigErrorText(R"({"solver": {"bogus": 1}})").find("bogus") != std::string::npos);
  CHECK(ConfigErrorText(R"({"extra": 1})").find("extra") != std::string::npos);
  CHECK(ConfigErrorText(R"({"solver": {"tau": "big"}})").find("solver.tau") != std::string::npos);
  CHECK(ConfigErrorText(R"({"solver": {"step": "adaptive"}})").find("solver.step") != std::string::npos);
  CHECK(ConfigErrorText(R"({"schedule": {"phase2": 0}})").find("schedule") != std::string::npos);
  CHECK(ConfigErrorText(R"({"workers": 0})").find("workers") != std::string::npos);
  CHECK(ConfigErrorText(R"({"simulation": {"fill_fraction": 2}})").find("simulation.fill_fraction") !=
        std::string::npos);
  CHECK(ConfigErrorText(R"({"noise": {"variances": [1, -1]}})").find("noise.variances") !=
        std::string::npos);
  CHECK(ConfigErrorText(R"({"tuning": {"mu_s_interval": {"lo": 2, "hi": 1}}})")
            .find("tuning.mu_s_interval") != std::string::npos);
  CHECK(ConfigErrorText("[1, 2").find("JSON") != std::string::npos);
}

TEST_CASE("simulate is reproducible") {
  TempDir a("sim_a"), b("sim_b");
  const CommandOutput out = cmd_simulate(SmallConfig(a.path));
  cmd_simulate(SmallConfig(b.path));
  CHECK(out.files.size() == 4);
  for (const char* name : {"sky.cube", "psf.cube", "dirty.cube", "manifest.json"}) {
    const std::string first = Slurp(a.path / name);
    std::string second = Slurp(b.path / name);
    if (std::string(name) == "manifest.json") {
      // Only the output directory differs.
      const auto j1 = nlohmann::json::parse(first), j2 = nlohmann::json::parse(second);
      auto strip = [](nlohmann::json j) {
        j["config"]["paths"]["output"] = "";
        return j;
      };
      CHECK(strip(j1) == strip(j2));
    } else {
      CHECK(first == second);
    }
  }
  const auto manifest = nlohmann::json::parse(Slurp(a.path / "manifest.json"));
  CHECK(manifest["noise_variances"].size() == 3);
  CHECK(manifest["wavelengths"] == nlohmann::json({1.0, 1.5, 2.0}));
  const ImageCube dirty = cube_read(a.path / "dirty.cube");
  CHECK(dirty.grid() == Grid{16, 16});
  CHECK(dirty.bands() == 3);
}

TEST_CASE("simulate warns on an infinite SNR") {
  TempDir dir("sim_inf");
  ExperimentConfig c = SmallConfig(dir.path);
  c.simulation.snr_db = std::numeric_limits<double>::infinity();
  const CommandOutput out = cmd_simulate(c);
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings[0].find("infinite SNR") != std::string::npos);
}

TEST_CASE("reconstruct without truth leaves metric columns blank") {
  TempDir dir("rec_blank");
  Simulate(dir.path / "sim");
  ExperimentConfig c = SmallConfig(dir.path / "rec");
  c.paths.dirty = dir.path / "sim" / "dirty.cube";
  c.paths.psf = dir.path / "sim" / "psf.cube";
  c.mu_s = 0.2;
  c.mu_lambda = 0.5;
  cmd_reconstruct(c);
  const auto lines = Lines(Slurp(dir.path / "rec" / "metrics.csv"));
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == kMetricsHeader);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    std::vector<std::string> cells;
    std::stringstream row(lines[k]);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (lines[k].back() == ',') cells.emplace_back();
    REQUIRE(cells.size() == 9);
    CHECK(cells[0] == std::to_string(k));
    CHECK(cells[4].empty());    // wmse
    CHECK_FALSE(cells[5].empty());  // PSURE from the manifest variances
    CHECK(cells[6].empty());    // snr
  }
  CHECK(fs::exists(dir.path / "rec" / "result.cube"));
  CHECK(fs::exists(dir.path / "rec" / "wmse.png"));
  CHECK(fs::exists(dir.path / "rec" / "snr.png"));
  CHECK_FALSE(fs::exists(dir.path / "rec" / "tuning.csv"));
}

TEST_CASE("reconstruct with truth and self-tuning") {
  TempDir dir("rec_tune");
  Simulate(dir.path / "sim");
  ExperimentConfig c = SmallConfig(dir.path / "rec");
  c.paths.dirty = dir.path / "sim" / "dirty.cube";
  c.paths.psf = dir.path / "sim" / "psf.cube";
  c.paths.truth = dir.path / "sim" / "sky.cube";
  c.self_tune = true;
  c.snapshot_every = 5;
  cmd_reconstruct(c);
  const auto metrics = Lines(Slurp(dir.path / "rec" / "metrics.csv"));
  REQUIRE(metrics.size() == 11);
  CHECK(metrics[1].find(",,") == std::string::npos);
  const auto tuning = Lines(Slurp(dir.path / "rec" / "tuning.csv"));
  CHECK(tuning[0] == "iter,phase,mu,psure,committed");
  std::size_t committed = 0;
  for (std::size_t k = 1; k < tuning.size(); ++k) committed += tuning[k].back() == '1';
  CHECK(committed == 6);
  CHECK(fs::exists(dir.path / "rec" / "snapshots" / "iter_000005.cube"));
  CHECK(fs::exists(dir.path / "rec" / "snapshots" / "iter_000010.cube"));
  const auto manifest = nlohmann::json::parse(Slurp(dir.path / "rec" / "manifest.json"));
  const double mu_s = manifest["result"]["mu_s"];
  CHECK(mu_s >= 0.0);
  CHECK(mu_s <= 2.0);
}

TEST_CASE("self-tuning needs noise variances") {
  TempDir dir("rec_nonoise");
  Simulate(dir.path / "sim");
  fs::remove(dir.path / "sim" / "manifest.json");
  ExperimentConfig c = SmallConfig(dir.path / "rec");
  c.paths.dirty = dir.path / "sim" / "dirty.cube";
  c.paths.psf = dir.path / "sim" / "psf.cube";
  c.self_tune = true;
  CHECK_THROWS_AS(cmd_reconstruct(c), ConfigError);
  c.noise_variances = {0.1};
  CHECK_NOTHROW(cmd_reconstruct(c));
  c.noise_variances = {0.1, 0.2};
  CHECK_THROWS(cmd_reconstruct(c));
}

TEST_CASE("reconstruct warns on an unsafe step") {
  TempDir dir("rec_warn");
  Simulate(dir.path / "sim");
  ExperimentConfig c = SmallConfig(dir.path / "rec");
  c.paths.dirty = dir.path / "sim" / "dirty.cube";
  c.paths.psf = dir.path / "sim" / "psf.cube";
  c.step = StepMode::kFixed;
  c.tau = 0.5;
  const CommandOutput out = cmd_reconstruct(c);
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings[0].find("certificate") != std::string::npos);
}

TEST_CASE("reconstruct input errors") {
  TempDir dir("rec_errors");
  ExperimentConfig c = SmallConfig(dir.path / "rec");
  CHECK_THROWS_AS(cmd_reconstruct(c), ConfigError);
  c.paths.dirty = dir.path / "nope.cube";
  c.paths.psf = dir.path / "nope.cube";
  try {
    cmd_reconstruct(c);
    FAIL("missing input accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
  Simulate(dir.path / "sim");
  ExperimentConfig other = SmallConfig(dir.path / "sim4");
  other.simulation.bands = 4;
  cmd_simulate(other);
  c.paths.dirty = dir.path / "sim" / "dirty.cube";
  c.paths.psf = dir.path / "sim4" / "psf.cube";
  CHECK_THROWS_AS(cmd_reconstruct(c), DimensionError);
}

TEST_CASE("gridsearch on collapsed intervals") {
  TempDir dir("grid");
  Simulate(dir.path / "sim");
  ExperimentConfig c = SmallConfig(dir.path / "grid");
  c.paths.dirty = dir.path / "sim" / "dirty.cube";
  c.paths.psf = dir.path / "sim" / "psf.cube";
  CHECK_THROWS_AS(cmd_gridsearch(c), ConfigError);
  c.paths.truth = dir.path / "sim" / "sky.cube";
  c.mu_s_interval = {0.3, 0.3, 0.01};
  c.mu_lambda_interval = {1.1, 1.1, 0.01};
  cmd_gridsearch(c);
  const auto manifest = nlohmann::json::parse(Slurp(dir.path / "grid" / "manifest.json"));
  CHECK(manifest["oracle"]["mu_s"] == doctest::Approx(0.3));
  CHECK(manifest["oracle"]["mu_lambda"] == doctest::Approx(1.1));
  const auto rows = Lines(Slurp(dir.path / "grid" / "gridsearch.csv"));
  CHECK(rows[0] == "stage,mu,wmse");
  CHECK(rows.size() == 3);

  // The replay is a plain fixed run with the oracle's parameters.
  const ImageCube result = cube_read(dir.path / "grid" / "result.cube");
  const Problem problem(cube_read(c.paths.dirty), cube_read(c.paths.psf));
  const WorkerPool pool(1);
  RunOptions options;
  options.tau = resolve_tau(c, problem, 0.3, 1.1);
  const RunResult direct =
      fixed_run(problem, nullptr, {{3, 0.3, 0.0, 1}, {7, 0.3, 1.1, 2}}, options, pool);
  CHECK(result == direct.estimate);
}

TEST_CASE("oracle search and grid sweep agree on the protocol") {
  const auto inst = testing::MakeInstance(Grid{16, 16}, 3, 90);
  const Problem problem(inst.dirty, inst.psf);
  const WorkerPool pool(1);
  const TuneSchedule schedule{4, 3, 3, {}};
  RunOptions options;
  options.tau = auto_tau(problem.psfs().max_norm_squared(), 10, 2, 3,
                         problem.spatial().basis_count());
  const GridSweep grid = sweep_grid(problem, inst.sky, schedule, {0.0, 0.5}, {0.0, 1.0, 2.0},
                                    options, pool);
  REQUIRE(grid.wmse.size() == 6);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double mu_s = grid.mu_s[i], mu_l = grid.mu_lambda[j];
      const RunResult r = fixed_run(problem, nullptr,
                                    {{4, mu_s, 0.0, 1}, {6, mu_s, mu_l, 2}}, options, pool);
      CHECK(grid.wmse[i * 3 + j] == true_wmse(r.estimate, inst.sky, problem.psfs()));
      CHECK(grid.snr_db[i * 3 + j] == snr_db(r.estimate, inst.sky));
      CHECK(grid.best_wmse() <= grid.wmse[i * 3 + j]);
    }
  }
  const OracleResult oracle =
      oracle_search(problem, inst.sky, schedule, {0.5, 0.5, 1e-9}, {0, 2, 0.05}, options, pool);
  CHECK(oracle.mu_s == doctest::Approx(0.5));
  CHECK(oracle.spectral.bracket_hi - oracle.spectral.bracket_lo <= 0.05);
  for (const auto& e : oracle.evaluations) CHECK((e.stage == 1 || e.stage == 2));
  CHECK(linspace(0, 2, 5) == std::vector<double>{0, 0.5, 1, 1.5, 2});
  CHECK(linspace(1, 1, 1) == std::vector<double>{1});
}

}

#ifdef MUFFIN_CLI_PATH
TEST_SUITE("cli") {

namespace {

int RunCli(const std::string& args) {
  const std::string command =
      std::string(MUFFIN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("exit codes") {
  TempDir dir("cli");
  const std::string d = dir.path.string();
  CHECK(RunCli("simulate --out " + d + "/sim --width 16 --height 16 --bands 2") == 0);
  CHECK(fs::exists(dir.path / "sim" / "dirty.cube"));
  CHECK(RunCli("reconstruct --dirty " + d + "/sim/dirty.cube --psf " + d +
               "/sim/psf.cube --phase1 2 --phase2 2 --phase3 2 --self-tune --out " + d +
               "/rec") == 0);
  CHECK(fs::exists(dir.path / "rec" / "tuning.csv"));
  CHECK(RunCli("simulate --fill 3 --out " + d + "/bad") == 2);
  CHECK(RunCli("simulate --no-such-flag") == 2);
  CHECK(RunCli("") == 2);
  CHECK(RunCli("reconstruct --dirty " + d + "/missing.cube --psf " + d + "/sim/psf.cube") == 3);
  CHECK(RunCli("simulate --out " + d + "/sim3 --width 16 --height 16 --bands 3") == 0);
  CHECK(RunCli("reconstruct --dirty " + d + "/sim/dirty.cube --psf " + d +
               "/sim3/psf.cube --out " + d + "/rec2") == 5);
  CHECK(RunCli("reconstruct --dirty " + d + "/sim/dirty.cube --psf " + d +
               "/sim/psf.cube --tau 1e300 --phase1 1 --phase2 1 --phase3 3 --mu-s 0.1 --out " +
               d + "/rec3") == 4);
  std::ofstream(dir.path / "bad.json") << R"({"solver": {"typo": 1}})";
  CHECK(RunCli("simulate --config " + d + "/bad.json") == 2);
}

}
#endif
