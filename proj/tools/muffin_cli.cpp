// muffin: simulate datasets, reconstruct sky cubes, run the oracle search.
//
//   muffin simulate    --out data
//   muffin reconstruct --dirty data/dirty.cube --psf data/psf.cube \
//                      --truth data/sky.cube --self-tune --out run
//   muffin gridsearch  --dirty ... --psf ... --truth ... --out oracle

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "muffin/experiment.hpp"

namespace {

enum ExitCode {
  kOk = 0,
  kUnexpected = 1,
  kConfig = 2,
  kIo = 3,
  kNumerical = 4,
  kDimension = 5,
};

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;

  std::optional<std::string> dirty, psf, truth, manifest, output;
  std::optional<std::size_t> width, height, bands;
  std::optional<double> fill, snr;
  bool full_scale = false;
  bool noiseless = false;

  std::optional<double> mu_s, mu_lambda, tau, sigma;
  std::optional<std::string> step;
  bool self_tune = false;
  std::optional<std::size_t> phase1, phase2, phase3, lookahead, snapshot_every;
  std::optional<std::string> stop;
  std::optional<double> mu_s_max, mu_lambda_max, rel_tolerance;
  std::optional<double> variance;
  std::optional<std::uint64_t> probe_seed;
};

void AddCommon(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "master seed for every generator");
  app->add_option("--workers", o.workers, "worker threads (default min(L, cores))");
  app->add_option("--out", o.output, "output directory");
}

void AddInputs(CLI::App* app, Overrides& o) {
  app->add_option("--dirty", o.dirty, "dirty cube");
  app->add_option("--psf", o.psf, "PSF cube");
  app->add_option("--truth", o.truth, "ground-truth sky cube");
  app->add_option("--manifest", o.manifest, "manifest holding noise variances");
  app->add_option("--noise-variance", o.variance, "noise variance for every band");
  app->add_option("--probe-seed", o.probe_seed, "Rademacher probe seed");
  app->add_option("--tau", o.tau, "primal step");
  app->add_option("--sigma", o.sigma, "dual step");
  app->add_option("--step", o.step, "fixed | auto")->check(CLI::IsMember({"fixed", "auto"}));
  app->add_option("--phase1", o.phase1, "phase 1 iterations");
  app->add_option("--phase2", o.phase2, "phase 2 iterations");
  app->add_option("--phase3", o.phase3, "phase 3 iterations");
  app->add_option("--stop", o.stop, "budget | relative_change")
      ->check(CLI::IsMember({"budget", "relative_change"}));
  app->add_option("--mu-s-max", o.mu_s_max, "upper end of the mu_s interval");
  app->add_option("--mu-lambda-max", o.mu_lambda_max, "upper end of the mu_lambda interval");
  app->add_option("--rel-tolerance", o.rel_tolerance, "bracket tolerance relative to the interval");
  app->add_option("--snapshot-every", o.snapshot_every, "write x every k iterations");
}

muffin::ExperimentConfig Resolve(const Overrides& o) {
  muffin::ExperimentConfig c =
      o.config.empty() ? muffin::ExperimentConfig{} : muffin::load_config(o.config);
  if (o.seed) c.apply_seed(*o.seed);
  if (o.workers) c.workers = *o.workers;
  if (o.dirty) c.paths.dirty = *o.dirty;
  if (o.psf) c.paths.psf = *o.psf;
  if (o.truth) c.paths.truth = *o.truth;
  if (o.manifest) c.paths.manifest = *o.manifest;
  if (o.output) c.paths.output = *o.output;
  if (o.width) c.simulation.grid.width = *o.width;
  if (o.height) c.simulation.grid.height = *o.height;
  if (o.bands) c.simulation.bands = *o.bands;
  if (o.fill) c.simulation.fill_fraction = *o.fill;
  if (o.snr) c.simulation.snr_db = *o.snr;
  if (o.noiseless) c.simulation.snr_db = std::numeric_limits<double>::infinity();
  if (o.full_scale) c.full_scale = true;
  if (o.mu_s) c.mu_s = *o.mu_s;
  if (o.mu_lambda) c.mu_lambda = *o.mu_lambda;
  if (o.tau) c.tau = *o.tau;
  if (o.sigma) c.sigma = *o.sigma;
  if (o.step) c.step = *o.step == "auto" ? muffin::StepMode::kAuto : muffin::StepMode::kFixed;
  if (o.self_tune) c.self_tune = true;
  if (o.phase1) c.schedule.phase1 = *o.phase1;
  if (o.phase2) c.schedule.phase2 = *o.phase2;
  if (o.phase3) c.schedule.phase3 = *o.phase3;
  if (o.stop) {
    c.schedule.stop.kind = *o.stop == "relative_change"
                               ? muffin::StopRule::Kind::kRelativeChange
                               : muffin::StopRule::Kind::kBudget;
  }
  if (o.lookahead) c.lookahead = *o.lookahead;
  if (o.mu_s_max) c.mu_s_interval.hi = *o.mu_s_max;
  if (o.mu_lambda_max) c.mu_lambda_interval.hi = *o.mu_lambda_max;
  if (o.rel_tolerance) {
    c.mu_s_interval.rel_tolerance = *o.rel_tolerance;
    c.mu_lambda_interval.rel_tolerance = *o.rel_tolerance;
  }
  if (o.variance) c.noise_variances = {*o.variance};
  if (o.probe_seed) c.probe_seed = *o.probe_seed;
  if (o.snapshot_every) c.snapshot_every = *o.snapshot_every;
  return c;
}

void Report(const muffin::CommandOutput& output) {
  for (const auto& warning : output.warnings) std::cerr << "warning: " << warning << '\n';
  for (const auto& [role, path] : output.files) {
    std::cout << role << ": " << path.string() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-frequency deconvolution with self-tuned regularization"};
  app.require_subcommand(1);
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset");
  AddCommon(simulate, o);
  simulate->add_option("--width", o.width, "image width");
  simulate->add_option("--height", o.height, "image height");
  simulate->add_option("--bands", o.bands, "number of bands");
  simulate->add_option("--fill", o.fill, "fraction of measured Fourier cells");
  simulate->add_option("--snr", o.snr, "target SNR of the dirty cube in dB");
  simulate->add_flag("--noiseless", o.noiseless, "add no noise");
  simulate->add_flag("--full-scale", o.full_scale, "256 x 256 x 100 dataset");

  auto* reconstruct = app.add_subcommand("reconstruct", "deconvolve a dirty cube");
  AddCommon(reconstruct, o);
  AddInputs(reconstruct, o);
  reconstruct->add_option("--mu-s", o.mu_s, "spatial weight (fixed runs)");
  reconstruct->add_option("--mu-lambda", o.mu_lambda, "spectral weight (fixed runs)");
  reconstruct->add_flag("--self-tune", o.self_tune, "tune both weights on PSURE");
  reconstruct->add_option("--lookahead", o.lookahead, "iterates per greedy trial");

  auto* gridsearch = app.add_subcommand("gridsearch", "oracle search on true WMSE");
  AddCommon(gridsearch, o);
  AddInputs(gridsearch, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const muffin::ExperimentConfig config = Resolve(o);
    if (simulate->parsed()) Report(muffin::cmd_simulate(config));
    if (reconstruct->parsed()) Report(muffin::cmd_reconstruct(config));
    if (gridsearch->parsed()) Report(muffin::cmd_gridsearch(config));
    return kOk;
  } catch (const muffin::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case muffin::ErrorKind::kConfig: return kConfig;
      case muffin::ErrorKind::kIo: return kIo;
      case muffin::ErrorKind::kNumerical: return kNumerical;
      case muffin::ErrorKind::kDimension: return kDimension;
    }
    return kUnexpected;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
}
