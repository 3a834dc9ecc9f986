#include "muffin/experiment.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "muffin/metrics.hpp"
#include "muffin/plot.hpp"

#ifndef MUFFIN_VERSION
#define MUFFIN_VERSION "unknown"
#endif

namespace muffin {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// ---- config (de)serialization ----------------------------------------------

void CheckKeys(const Json& object, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!object.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : object.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return key == k; });
    if (!known) {
      throw ConfigError("unknown config field " +
                        (where.empty() ? key : where + "." + key));
    }
  }
}

template <typename T>
void Read(const Json& object, const std::string& where, const char* key, T& out) {
  if (!object.contains(key)) return;
  try {
    out = object.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config field " + where + "." + key + " has the wrong type");
  }
}

// Numbers, or the strings "inf" / "-inf" for infinities.
void ReadExtended(const Json& object, const std::string& where, const char* key,
                  double& out) {
  if (!object.contains(key)) return;
  const Json& value = object.at(key);
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text == "inf") return void(out = std::numeric_limits<double>::infinity());
    if (text == "-inf") return void(out = -std::numeric_limits<double>::infinity());
    throw ConfigError("config field " + where + "." + key + " must be a number");
  }
  Read(object, where, key, out);
}

Json ExtendedNumber(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

void ReadPath(const Json& object, const std::string& where, const char* key,
              fs::path& out) {
  std::string text;
  if (!object.contains(key)) return;
  Read(object, where, key, text);
  out = text;
}

void ReadInterval(const Json& object, const std::string& where, const char* key,
                  IntervalConfig& out) {
  if (!object.contains(key)) return;
  const std::string name = where + "." + key;
  const Json& sub = object.at(key);
  CheckKeys(sub, name, {"lo", "hi", "rel_tolerance"});
  Read(sub, name, "lo", out.lo);
  Read(sub, name, "hi", out.hi);
  Read(sub, name, "rel_tolerance", out.rel_tolerance);
}

Json IntervalJson(const IntervalConfig& interval) {
  return Json{{"lo", interval.lo},
              {"hi", interval.hi},
              {"rel_tolerance", interval.rel_tolerance}};
}

Json ConfigJson(const ExperimentConfig& c) {
  Json j;
  j["paths"] = {{"dirty", c.paths.dirty.string()},
                {"psf", c.paths.psf.string()},
                {"truth", c.paths.truth.string()},
                {"manifest", c.paths.manifest.string()},
                {"output", c.paths.output.string()}};
  const SimulationConfig& s = c.simulation;
  j["simulation"] = {{"width", s.grid.width},
                     {"height", s.grid.height},
                     {"bands", s.bands},
                     {"fill_fraction", s.fill_fraction},
                     {"snr_db", ExtendedNumber(s.snr_db)},
                     {"peak", s.peak},
                     {"index_noise_weight", s.index_noise_weight},
                     {"index_image_weight", s.index_image_weight},
                     {"full_scale", c.full_scale}};
  j["solver"] = {{"mu_s", c.mu_s},
                 {"mu_lambda", c.mu_lambda},
                 {"tau", c.tau},
                 {"sigma", c.sigma},
                 {"step", c.step == StepMode::kAuto ? "auto" : "fixed"}};
  j["tuning"] = {{"self_tune", c.self_tune},
                 {"lookahead", c.lookahead},
                 {"mu_s_interval", IntervalJson(c.mu_s_interval)},
                 {"mu_lambda_interval", IntervalJson(c.mu_lambda_interval)}};
  const bool relative = c.schedule.stop.kind == StopRule::Kind::kRelativeChange;
  j["schedule"] = {{"phase1", c.schedule.phase1},
                   {"phase2", c.schedule.phase2},
                   {"phase3", c.schedule.phase3},
                   {"stop", relative ? "relative_change" : "budget"},
                   {"threshold", c.schedule.stop.threshold},
                   {"window", c.schedule.stop.window}};
  j["noise"] = {{"variances", c.noise_variances}};
  j["seeds"] = {{"sky", s.sky_seed},
                {"psf", s.psf_seed},
                {"noise", s.noise_seed},
                {"probe", c.probe_seed}};
  j["workers"] = c.workers ? Json(*c.workers) : Json(nullptr);
  j["snapshot_every"] = c.snapshot_every;
  return j;
}

ExperimentConfig ConfigFromJson(const Json& j) {
  ExperimentConfig c;
  CheckKeys(j, "", {"paths", "simulation", "solver", "tuning", "schedule",
                    "noise", "seeds", "workers", "snapshot_every"});
  if (j.contains("paths")) {
    const Json& p = j["paths"];
    CheckKeys(p, "paths", {"dirty", "psf", "truth", "manifest", "output"});
    ReadPath(p, "paths", "dirty", c.paths.dirty);
    ReadPath(p, "paths", "psf", c.paths.psf);
    ReadPath(p, "paths", "truth", c.paths.truth);
    ReadPath(p, "paths", "manifest", c.paths.manifest);
    ReadPath(p, "paths", "output", c.paths.output);
  }
  if (j.contains("simulation")) {
    const Json& s = j["simulation"];
    CheckKeys(s, "simulation",
              {"width", "height", "bands", "fill_fraction", "snr_db", "peak",
               "index_noise_weight", "index_image_weight", "full_scale"});
    Read(s, "simulation", "width", c.simulation.grid.width);
    Read(s, "simulation", "height", c.simulation.grid.height);
    Read(s, "simulation", "bands", c.simulation.bands);
    Read(s, "simulation", "fill_fraction", c.simulation.fill_fraction);
    ReadExtended(s, "simulation", "snr_db", c.simulation.snr_db);
    Read(s, "simulation", "peak", c.simulation.peak);
    Read(s, "simulation", "index_noise_weight", c.simulation.index_noise_weight);
    Read(s, "simulation", "index_image_weight", c.simulation.index_image_weight);
    Read(s, "simulation", "full_scale", c.full_scale);
  }
  if (j.contains("solver")) {
    const Json& s = j["solver"];
    CheckKeys(s, "solver", {"mu_s", "mu_lambda", "tau", "sigma", "step"});
    Read(s, "solver", "mu_s", c.mu_s);
    Read(s, "solver", "mu_lambda", c.mu_lambda);
    Read(s, "solver", "tau", c.tau);
    Read(s, "solver", "sigma", c.sigma);
    std::string step = "fixed";
    Read(s, "solver", "step", step);
    if (step == "auto") {
      c.step = StepMode::kAuto;
    } else if (step != "fixed") {
      throw ConfigError("solver.step must be \"fixed\" or \"auto\"");
    }
  }
  if (j.contains("tuning")) {
    const Json& t = j["tuning"];
    CheckKeys(t, "tuning",
              {"self_tune", "lookahead", "mu_s_interval", "mu_lambda_interval"});
    Read(t, "tuning", "self_tune", c.self_tune);
    Read(t, "tuning", "lookahead", c.lookahead);
    ReadInterval(t, "tuning", "mu_s_interval", c.mu_s_interval);
    ReadInterval(t, "tuning", "mu_lambda_interval", c.mu_lambda_interval);
  }
  if (j.contains("schedule")) {
    const Json& s = j["schedule"];
    CheckKeys(s, "schedule",
              {"phase1", "phase2", "phase3", "stop", "threshold", "window"});
    Read(s, "schedule", "phase1", c.schedule.phase1);
    Read(s, "schedule", "phase2", c.schedule.phase2);
    Read(s, "schedule", "phase3", c.schedule.phase3);
    std::string stop = "budget";
    Read(s, "schedule", "stop", stop);
    if (stop == "relative_change") {
      c.schedule.stop.kind = StopRule::Kind::kRelativeChange;
    } else if (stop != "budget") {
      throw ConfigError("schedule.stop must be \"budget\" or \"relative_change\"");
    }
    Read(s, "schedule", "threshold", c.schedule.stop.threshold);
    Read(s, "schedule", "window", c.schedule.stop.window);
  }
  if (j.contains("noise")) {
    CheckKeys(j["noise"], "noise", {"variances"});
    Read(j["noise"], "noise", "variances", c.noise_variances);
  }
  if (j.contains("seeds")) {
    const Json& s = j["seeds"];
    CheckKeys(s, "seeds", {"sky", "psf", "noise", "probe"});
    Read(s, "seeds", "sky", c.simulation.sky_seed);
    Read(s, "seeds", "psf", c.simulation.psf_seed);
    Read(s, "seeds", "noise", c.simulation.noise_seed);
    Read(s, "seeds", "probe", c.probe_seed);
  }
  if (j.contains("workers") && !j["workers"].is_null()) {
    std::size_t workers = 0;
    Read(j, "", "workers", workers);
    c.workers = workers;
  }
  Read(j, "", "snapshot_every", c.snapshot_every);
  return c;
}

// ---- files ------------------------------------------------------------------

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CubeError(CubeErrc::kIo, "cannot open " + path.string());
  out << text;
  if (!out) throw CubeError(CubeErrc::kIo, "write failed for " + path.string());
}

Json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CubeError(CubeErrc::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void PrepareOutput(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw CubeError(CubeErrc::kIo, "output directory " + dir.string() +
                                       " is not writable");
  }
}

Json Provenance(const ExperimentConfig& config, const std::string& command) {
  Json j;
  j["command"] = command;
  j["versions"] = {{"muffin", MUFFIN_VERSION},
                   {"fftw", std::string(fftw_version)},
                   {"compiler", __VERSION__}};
  j["config"] = ConfigJson(config);
  return j;
}

ImageCube ReadRequired(const fs::path& path, const char* field) {
  if (path.empty()) throw ConfigError(std::string(field) + " is required");
  if (!fs::exists(path)) {
    throw CubeError(CubeErrc::kIo, std::string(field) + ": " + path.string() +
                                       " does not exist");
  }
  return cube_read(path);
}

SimulationConfig EffectiveSimulation(const ExperimentConfig& config) {
  SimulationConfig sim = config.simulation;
  if (config.full_scale) {
    sim.grid = Grid{256, 256};
    sim.bands = 100;
  }
  return sim;
}

// Noise variances: explicit list (one value broadcasts), else the manifest
// named in the config, else manifest.json beside the dirty cube.
std::optional<NoiseModel> ResolveNoise(const ExperimentConfig& config,
                                       std::size_t bands) {
  if (!config.noise_variances.empty()) {
    NoiseModel noise{config.noise_variances};
    if (noise.variances.size() == 1) noise = NoiseModel::uniform(bands, noise.variances[0]);
    noise.validate(bands);
    return noise;
  }
  fs::path manifest = config.paths.manifest;
  if (manifest.empty()) {
    const fs::path beside = config.paths.dirty.parent_path() / "manifest.json";
    if (fs::exists(beside)) manifest = beside;
  }
  if (manifest.empty()) return std::nullopt;
  const Json j = ReadJsonFile(manifest);
  if (!j.contains("noise_variances")) return std::nullopt;
  NoiseModel noise;
  try {
    noise.variances = j.at("noise_variances").get<std::vector<double>>();
  } catch (const Json::exception&) {
    throw ConfigError(manifest.string() + ": noise_variances is malformed");
  }
  noise.validate(bands);
  return noise;
}

std::string FormatNumber(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string TuningCsv(const std::vector<TrialRecord>& trials) {
  std::ostringstream out;
  out << "iter,phase,mu,psure,committed\n";
  for (const auto& t : trials) {
    out << t.iteration << ',' << t.phase << ',' << FormatNumber(t.mu) << ','
        << FormatNumber(t.psure) << ',' << (t.committed ? 1 : 0) << '\n';
  }
  return out.str();
}

void WritePlots(const fs::path& dir, const std::vector<MetricsRow>& rows,
                CommandOutput& output) {
  Series wmse{{}, {}, 0x1f77b4}, wmse_hat{{}, {}, 0xff7f0e}, snr{{}, {}, 0x2ca02c};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rows) {
    const double x = static_cast<double>(row.iteration);
    wmse.x.push_back(x);
    wmse.y.push_back(row.wmse ? to_db(*row.wmse) : nan);
    wmse_hat.x.push_back(x);
    wmse_hat.y.push_back(row.wmse_hat && *row.wmse_hat > 0 ? to_db(*row.wmse_hat) : nan);
    snr.x.push_back(x);
    snr.y.push_back(row.snr_db ? *row.snr_db : nan);
  }
  write_line_plot(dir / "wmse.png", {wmse, wmse_hat});
  write_line_plot(dir / "snr.png", {snr});
  output.files.emplace_back("wmse_plot", dir / "wmse.png");
  output.files.emplace_back("snr_plot", dir / "snr.png");
}

WorkerPool MakePool(const ExperimentConfig& config, std::size_t bands) {
  return WorkerPool(config.workers ? *config.workers
                                   : WorkerPool::default_workers(bands));
}

Json Summary(const RunResult& result) {
  Json j;
  j["mu_s"] = result.mu_s;
  j["mu_lambda"] = result.mu_lambda;
  j["iterations"] = result.rows.empty() ? 0 : result.rows.back().iteration;
  if (result.phase1_end) j["phase1_end"] = result.phase1_end;
  if (result.phase2_end) j["phase2_end"] = result.phase2_end;
  if (!result.rows.empty()) {
    const MetricsRow& last = result.rows.back();
    if (last.wmse) j["final_wmse"] = *last.wmse;
    if (last.wmse_hat) j["final_wmse_hat"] = *last.wmse_hat;
    if (last.snr_db) j["final_snr_db"] = ExtendedNumber(*last.snr_db);
  }
  return j;
}

void WriteRunArtifacts(const fs::path& dir, const RunResult& result,
                       CommandOutput& output) {
  cube_write(result.estimate, dir / "result.cube");
  output.files.emplace_back("result", dir / "result.cube");
  write_metrics_csv(dir / "metrics.csv", result.rows);
  output.files.emplace_back("metrics", dir / "metrics.csv");
  WritePlots(dir, result.rows, output);
}

void AttachSnapshots(const ExperimentConfig& config, RunOptions& options) {
  if (config.snapshot_every == 0) return;
  const fs::path dir = config.paths.output / "snapshots";
  PrepareOutput(dir);
  const std::size_t every = config.snapshot_every;
  options.on_iterate = [dir, every](std::size_t iteration, const ImageCube& x) {
    if (iteration % every != 0) return;
    char name[32];
    std::snprintf(name, sizeof name, "iter_%06zu.cube", iteration);
    cube_write(x, dir / name);
  };
}

}  // namespace

// ---- config -------------------------------------------------------------------

void ExperimentConfig::apply_seed(std::uint64_t seed) {
  simulation.sky_seed = seed;
  simulation.psf_seed = seed + 1;
  simulation.noise_seed = seed + 2;
  probe_seed = seed + 3;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field " + field + " " + why);
  };
  const SimulationConfig& s = simulation;
  if (s.grid.width == 0 || s.grid.height == 0) fail("simulation.width/height", "must be >= 1");
  if (s.bands == 0) fail("simulation.bands", "must be >= 1");
  if (!(s.fill_fraction > 0.0 && s.fill_fraction <= 1.0)) {
    fail("simulation.fill_fraction", "must lie in (0, 1]");
  }
  if (std::isnan(s.snr_db) || s.snr_db == -std::numeric_limits<double>::infinity()) {
    fail("simulation.snr_db", "must be a number or \"inf\"");
  }
  if (!(s.peak > 0.0) || !std::isfinite(s.peak)) fail("simulation.peak", "must be positive");
  if (!(mu_s >= 0.0) || !std::isfinite(mu_s)) fail("solver.mu_s", "must be >= 0");
  if (!(mu_lambda >= 0.0) || !std::isfinite(mu_lambda)) fail("solver.mu_lambda", "must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("solver.tau", "must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("solver.sigma", "must be positive");
  for (const auto& [interval, name] :
       {std::pair{&mu_s_interval, "tuning.mu_s_interval"},
        std::pair{&mu_lambda_interval, "tuning.mu_lambda_interval"}}) {
    if (!(interval->lo >= 0.0) || !(interval->hi >= interval->lo) ||
        !std::isfinite(interval->hi)) {
      fail(name, "must satisfy 0 <= lo <= hi");
    }
    if (!(interval->rel_tolerance > 0.0 && interval->rel_tolerance < 1.0)) {
      fail(std::string(name) + ".rel_tolerance", "must lie in (0, 1)");
    }
  }
  if (lookahead == 0) fail("tuning.lookahead", "must be >= 1");
  try {
    schedule.validate();
  } catch (const ConfigError& e) {
    fail("schedule", e.what());
  }
  for (double v : noise_variances) {
    if (!(v > 0.0) || !std::isfinite(v)) fail("noise.variances", "must be positive");
  }
  if (workers && *workers == 0) fail("workers", "must be >= 1");
}

ExperimentConfig parse_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return ConfigFromJson(j);
}

ExperimentConfig load_config(const fs::path& path) {
  return ConfigFromJson(ReadJsonFile(path));
}

std::string to_json(const ExperimentConfig& config) {
  return ConfigJson(config).dump(2);
}

double resolve_tau(const ExperimentConfig& config, const Problem& problem,
                   double mu_s, double mu_lambda) {
  if (config.step == StepMode::kFixed) return config.tau;
  return auto_tau(problem.psfs().max_norm_squared(), config.sigma, mu_s,
                  mu_lambda, problem.spatial().basis_count());
}

namespace {

void WarnOnCertificate(const Problem& problem, const RunOptions& options,
                       double mu_s, double mu_lambda, CommandOutput& output) {
  const double certificate = convergence_certificate(
      SolverParams{mu_s, mu_lambda, options.tau, options.sigma},
      problem.psfs().max_norm_squared(), problem.spatial().basis_count());
  if (certificate > 1.0) {
    output.warnings.push_back("convergence certificate is " + FormatNumber(certificate) +
                              " > 1 at mu_s=" + FormatNumber(mu_s) +
                              ", mu_lambda=" + FormatNumber(mu_lambda) +
                              "; the iteration may diverge (try step \"auto\")");
  }
}

}  // namespace

// ---- commands -------------------------------------------------------------------

CommandOutput cmd_simulate(const ExperimentConfig& config) {
  config.validate();
  const SimulationConfig sim = EffectiveSimulation(config);
  const fs::path& dir = config.paths.output;
  PrepareOutput(dir);

  CommandOutput output;
  const Dataset data = simulate_dataset(sim);
  if (std::isinf(sim.snr_db)) {
    output.warnings.push_back("infinite SNR: no noise added, variance clamped to " +
                              FormatNumber(kNoiselessVariance));
  }
  cube_write(data.sky, dir / "sky.cube");
  cube_write(data.psf, dir / "psf.cube");
  cube_write(data.dirty, dir / "dirty.cube");
  output.files = {{"sky", dir / "sky.cube"},
                  {"psf", dir / "psf.cube"},
                  {"dirty", dir / "dirty.cube"}};

  Json manifest = Provenance(config, "simulate");
  manifest["width"] = sim.grid.width;
  manifest["height"] = sim.grid.height;
  manifest["bands"] = sim.bands;
  manifest["wavelengths"] = data.sky.wavelengths();
  manifest["snr_db"] = ExtendedNumber(sim.snr_db);
  manifest["realized_snr_db"] = ExtendedNumber(data.realized_snr_db);
  manifest["noise_variances"] = data.noise.variances;
  manifest["files"] = {{"sky", "sky.cube"}, {"psf", "psf.cube"}, {"dirty", "dirty.cube"}};
  WriteText(dir / "manifest.json", manifest.dump(2) + "\n");
  output.files.emplace_back("manifest", dir / "manifest.json");
  return output;
}

CommandOutput cmd_reconstruct(const ExperimentConfig& config) {
  config.validate();
  ImageCube dirty = ReadRequired(config.paths.dirty, "paths.dirty");
  const ImageCube psf = ReadRequired(config.paths.psf, "paths.psf");
  std::optional<ImageCube> truth;
  if (!config.paths.truth.empty()) truth = ReadRequired(config.paths.truth, "paths.truth");
  if (!psf.same_shape(dirty) || (truth && !truth->same_shape(dirty))) {
    throw DimensionError("dirty, psf and truth cubes must share grid and bands");
  }
  const std::optional<NoiseModel> noise = ResolveNoise(config, dirty.bands());
  if (config.self_tune && !noise) {
    throw ConfigError("self-tuning needs noise variances (noise.variances or a manifest)");
  }
  const fs::path& dir = config.paths.output;
  PrepareOutput(dir);

  const Problem problem(std::move(dirty), psf);
  const WorkerPool pool = MakePool(config, problem.bands());
  RunOptions options;
  options.sigma = config.sigma;
  options.probe_seed = config.probe_seed;
  options.lookahead = config.lookahead;
  options.truth = truth ? &*truth : nullptr;
  AttachSnapshots(config, options);

  CommandOutput output;
  RunResult result;
  Json manifest = Provenance(config, "reconstruct");
  if (config.self_tune) {
    options.tau = resolve_tau(config, problem, config.mu_s_interval.hi,
                              config.mu_lambda_interval.hi);
    WarnOnCertificate(problem, options, config.mu_s_interval.hi,
                      config.mu_lambda_interval.hi, output);
    result = self_tuned_run(problem, *noise, config.schedule,
                            config.mu_s_interval.interval(),
                            config.mu_lambda_interval.interval(), options, pool);
    WriteText(dir / "tuning.csv", TuningCsv(result.trials));
    output.files.emplace_back("tuning", dir / "tuning.csv");
  } else {
    options.tau = resolve_tau(config, problem, config.mu_s, config.mu_lambda);
    WarnOnCertificate(problem, options, config.mu_s, config.mu_lambda, output);
    result = fixed_run(problem, noise ? &*noise : nullptr,
                       {Segment{config.schedule.total(), config.mu_s,
                                config.mu_lambda, 0}},
                       options, pool);
  }
  WriteRunArtifacts(dir, result, output);

  manifest["tau"] = options.tau;
  manifest["workers"] = pool.workers();
  manifest["noise_variances"] = noise ? Json(noise->variances) : Json(nullptr);
  manifest["result"] = Summary(result);
  WriteText(dir / "manifest.json", manifest.dump(2) + "\n");
  output.files.emplace_back("manifest", dir / "manifest.json");
  return output;
}

CommandOutput cmd_gridsearch(const ExperimentConfig& config) {
  config.validate();
  if (config.paths.truth.empty()) {
    throw ConfigError("gridsearch needs paths.truth (the ground-truth sky cube)");
  }
  ImageCube dirty = ReadRequired(config.paths.dirty, "paths.dirty");
  const ImageCube psf = ReadRequired(config.paths.psf, "paths.psf");
  const ImageCube truth = ReadRequired(config.paths.truth, "paths.truth");
  if (!psf.same_shape(dirty) || !truth.same_shape(dirty)) {
    throw DimensionError("dirty, psf and truth cubes must share grid and bands");
  }
  const std::optional<NoiseModel> noise = ResolveNoise(config, dirty.bands());
  const fs::path& dir = config.paths.output;
  PrepareOutput(dir);

  const Problem problem(std::move(dirty), psf);
  const WorkerPool pool = MakePool(config, problem.bands());
  RunOptions options;
  options.sigma = config.sigma;
  options.probe_seed = config.probe_seed;
  options.truth = &truth;
  options.tau = resolve_tau(config, problem, config.mu_s_interval.hi,
                            config.mu_lambda_interval.hi);

  const OracleResult oracle = oracle_search(
      problem, truth, config.schedule, config.mu_s_interval.interval(),
      config.mu_lambda_interval.interval(), options, pool);

  CommandOutput output;
  WarnOnCertificate(problem, options, config.mu_s_interval.hi,
                    config.mu_lambda_interval.hi, output);
  std::ostringstream csv;
  csv << "stage,mu,wmse\n";
  for (const auto& e : oracle.evaluations) {
    csv << e.stage << ',' << FormatNumber(e.mu) << ',' << FormatNumber(e.wmse) << '\n';
  }
  WriteText(dir / "gridsearch.csv", csv.str());
  output.files.emplace_back("gridsearch", dir / "gridsearch.csv");

  AttachSnapshots(config, options);
  const TuneSchedule& s = config.schedule;
  const RunResult replay = fixed_run(
      problem, noise ? &*noise : nullptr,
      {Segment{s.phase1, oracle.mu_s, 0.0, 1},
       Segment{s.phase2, oracle.mu_s, oracle.mu_lambda, 2},
       Segment{s.phase3, oracle.mu_s, oracle.mu_lambda, 3}},
      options, pool);
  WriteRunArtifacts(dir, replay, output);

  Json manifest = Provenance(config, "gridsearch");
  manifest["tau"] = options.tau;
  manifest["workers"] = pool.workers();
  manifest["noise_variances"] = noise ? Json(noise->variances) : Json(nullptr);
  manifest["oracle"] = {{"mu_s", oracle.mu_s},
                        {"mu_lambda", oracle.mu_lambda},
                        {"mu_s_bracket", {oracle.spatial.bracket_lo, oracle.spatial.bracket_hi}},
                        {"mu_lambda_bracket",
                         {oracle.spectral.bracket_lo, oracle.spectral.bracket_hi}},
                        {"evaluations", oracle.evaluations.size()}};
  manifest["result"] = Summary(replay);
  WriteText(dir / "manifest.json", manifest.dump(2) + "\n");
  output.files.emplace_back("manifest", dir / "manifest.json");
  return output;
}

// ---- oracle protocol --------------------------------------------------------------

OracleResult oracle_search(const Problem& problem, const ImageCube& truth,
                           const TuneSchedule& schedule,
                           const SearchInterval& mu_s_interval,
                           const SearchInterval& mu_lambda_interval,
                           const RunOptions& options, const WorkerPool& pool) {
  schedule.validate();
  RunOptions quiet = options;
  quiet.record_rows = false;
  quiet.on_iterate = nullptr;

  auto phase1 = [&](double mu_s) {
    TunerState state = TunerState::start(
        problem, SolverParams{mu_s, 0.0, options.tau, options.sigma}, std::nullopt);
    RunResult scratch;
    run_segments(state, problem, nullptr, {Segment{schedule.phase1, mu_s, 0.0, 1}},
                 quiet, pool, scratch);
    return state;
  };

  OracleResult out;
  out.spatial = golden_section(
      [&](double mu_s) {
        const TunerState state = phase1(mu_s);
        const double w = true_wmse(state.solver.x_tilde, truth, problem.psfs());
        out.evaluations.push_back({1, mu_s, w});
        return w;
      },
      mu_s_interval);
  out.mu_s = out.spatial.argmin;

  const TunerState base = phase1(out.mu_s);
  out.spectral = golden_section(
      [&](double mu_lambda) {
        TunerState state = base;
        RunResult scratch;
        run_segments(state, problem, nullptr,
                     {Segment{schedule.phase2 + schedule.phase3, out.mu_s,
                              mu_lambda, 2}},
                     quiet, pool, scratch);
        const double w = true_wmse(state.solver.x_tilde, truth, problem.psfs());
        out.evaluations.push_back({2, mu_lambda, w});
        return w;
      },
      mu_lambda_interval);
  out.mu_lambda = out.spectral.argmin;
  return out;
}

GridSweep sweep_grid(const Problem& problem, const ImageCube& truth,
                     const TuneSchedule& schedule,
                     const std::vector<double>& mu_s_values,
                     const std::vector<double>& mu_lambda_values,
                     const RunOptions& options, const WorkerPool& pool) {
  schedule.validate();
  if (mu_s_values.empty() || mu_lambda_values.empty()) {
    throw ConfigError("parameter grid must not be empty");
  }
  RunOptions quiet = options;
  quiet.record_rows = false;
  quiet.on_iterate = nullptr;

  GridSweep sweep;
  sweep.mu_s = mu_s_values;
  sweep.mu_lambda = mu_lambda_values;
  sweep.wmse.resize(mu_s_values.size() * mu_lambda_values.size());
  sweep.snr_db.resize(sweep.wmse.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mu_s_values.size(); ++i) {
    const double mu_s = mu_s_values[i];
    TunerState base = TunerState::start(
        problem, SolverParams{mu_s, 0.0, options.tau, options.sigma}, std::nullopt);
    RunResult scratch;
    run_segments(base, problem, nullptr, {Segment{schedule.phase1, mu_s, 0.0, 1}},
                 quiet, pool, scratch);
    for (std::size_t k = 0; k < mu_lambda_values.size(); ++k) {
      TunerState state = base;
      run_segments(state, problem, nullptr,
                   {Segment{schedule.phase2 + schedule.phase3, mu_s,
                            mu_lambda_values[k], 2}},
                   quiet, pool, scratch);
      const std::size_t cell = i * mu_lambda_values.size() + k;
      sweep.wmse[cell] = true_wmse(state.solver.x_tilde, truth, problem.psfs());
      sweep.snr_db[cell] = snr_db(state.solver.x_tilde, truth);
      if (sweep.wmse[cell] < best) {
        best = sweep.wmse[cell];
        sweep.best_s = i;
        sweep.best_lambda = k;
      }
    }
  }
  return sweep;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

}  // namespace muffin
