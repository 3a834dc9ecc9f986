#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>

#include "muffin/experiment.hpp"
#include "muffin/metrics.hpp"
#include "muffin/simulator.hpp"
#include "muffin/tuner.hpp"

namespace py = pybind11;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

// Cubes cross the boundary as (bands, height, width) float64 arrays.
muffin::ImageCube ToCube(const Array& array,
                         std::vector<double> wavelengths = {}) {
  if (array.ndim() != 3) throw muffin::DimensionError("expected a (bands, height, width) array");
  const muffin::Grid grid{static_cast<std::size_t>(array.shape(2)),
                          static_cast<std::size_t>(array.shape(1))};
  const auto bands = static_cast<std::size_t>(array.shape(0));
  std::vector<double> data(array.data(), array.data() + array.size());
  if (wavelengths.empty()) {
    return muffin::ImageCube(grid, bands, std::move(data), muffin::wavelength_grid(bands));
  }
  return muffin::ImageCube(grid, bands, std::move(data), std::move(wavelengths));
}

Array FromCube(const muffin::ImageCube& cube) {
  Array out({cube.bands(), cube.height(), cube.width()});
  std::copy(cube.data().begin(), cube.data().end(), out.mutable_data());
  return out;
}

py::dict RowsToDict(const std::vector<muffin::MetricsRow>& rows) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> iteration;
  std::vector<int> phase;
  std::vector<double> mu_s, mu_lambda, wmse, wmse_hat, snr, cost, seconds;
  for (const auto& r : rows) {
    iteration.push_back(r.iteration);
    phase.push_back(r.phase);
    mu_s.push_back(r.mu_s);
    mu_lambda.push_back(r.mu_lambda);
    wmse.push_back(r.wmse.value_or(nan));
    wmse_hat.push_back(r.wmse_hat.value_or(nan));
    snr.push_back(r.snr_db.value_or(nan));
    cost.push_back(r.cost.value_or(nan));
    seconds.push_back(r.seconds);
  }
  py::dict d;
  d["iteration"] = py::array(py::cast(iteration));
  d["phase"] = py::array(py::cast(phase));
  d["mu_s"] = py::array(py::cast(mu_s));
  d["mu_lambda"] = py::array(py::cast(mu_lambda));
  d["wmse"] = py::array(py::cast(wmse));
  d["wmse_hat"] = py::array(py::cast(wmse_hat));
  d["snr_db"] = py::array(py::cast(snr));
  d["cost"] = py::array(py::cast(cost));
  d["seconds"] = py::array(py::cast(seconds));
  return d;
}

py::dict ResultToDict(const muffin::RunResult& result) {
  py::dict d;
  d["estimate"] = FromCube(result.estimate);
  d["mu_s"] = result.mu_s;
  d["mu_lambda"] = result.mu_lambda;
  d["rows"] = RowsToDict(result.rows);
  d["phase1_end"] = result.phase1_end;
  d["phase2_end"] = result.phase2_end;
  std::vector<double> psure;
  for (const auto& r : result.reports) psure.push_back(r.wmse_hat);
  d["wmse_hat"] = py::array(py::cast(psure));
  return d;
}

muffin::RunOptions Options(double tau, double sigma, std::uint64_t probe_seed,
                           const muffin::ImageCube* truth, bool record_rows) {
  muffin::RunOptions options;
  options.tau = tau;
  options.sigma = sigma;
  options.probe_seed = probe_seed;
  options.truth = truth;
  options.record_rows = record_rows;
  return options;
}

struct PyProblem {
  muffin::Problem problem;
  PyProblem(const Array& dirty, const Array& psf)
      : problem(ToCube(dirty), ToCube(psf)) {}
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-frequency deconvolution with self-tuned regularization";

  py::register_exception<muffin::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<muffin::DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<muffin::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<muffin::CubeError>(m, "CubeError", PyExc_IOError);

  m.def("wavelength_grid", &muffin::wavelength_grid, py::arg("bands"),
        py::arg("reference") = 1.0);

  m.def(
      "simulate",
      [](std::size_t width, std::size_t height, std::size_t bands, double fill,
         double snr_db, double peak, std::uint64_t sky_seed,
         std::uint64_t psf_seed, std::uint64_t noise_seed) {
        muffin::SimulationConfig config;
        config.grid = {width, height};
        config.bands = bands;
        config.fill_fraction = fill;
        config.snr_db = snr_db;
        config.peak = peak;
        config.sky_seed = sky_seed;
        config.psf_seed = psf_seed;
        config.noise_seed = noise_seed;
        const muffin::Dataset data = muffin::simulate_dataset(config);
        py::dict d;
        d["sky"] = FromCube(data.sky);
        d["psf"] = FromCube(data.psf);
        d["clean"] = FromCube(data.clean);
        d["dirty"] = FromCube(data.dirty);
        d["variances"] = data.noise.variances;
        d["realized_snr_db"] = data.realized_snr_db;
        d["wavelengths"] = data.sky.wavelengths();
        return d;
      },
      py::arg("width") = 32, py::arg("height") = 32, py::arg("bands") = 4,
      py::arg("fill") = 0.25, py::arg("snr_db") = 10.0, py::arg("peak") = 10.0,
      py::arg("sky_seed") = 1, py::arg("psf_seed") = 2, py::arg("noise_seed") = 3);

  m.def(
      "apply_psf",
      [](const Array& psf, const Array& sky) {
        return FromCube(muffin::PsfSet(ToCube(psf)).apply(ToCube(sky)));
      },
      py::arg("psf"), py::arg("sky"));

  m.def(
      "true_wmse",
      [](const Array& estimate, const Array& truth, const Array& psf) {
        return muffin::true_wmse(ToCube(estimate), ToCube(truth),
                                 muffin::PsfSet(ToCube(psf)));
      },
      py::arg("estimate"), py::arg("truth"), py::arg("psf"));
  m.def(
      "snr_db",
      [](const Array& estimate, const Array& truth) {
        return muffin::snr_db(ToCube(estimate), ToCube(truth));
      },
      py::arg("estimate"), py::arg("truth"));

  m.def(
      "golden_section",
      [](const std::function<double(double)>& f, double lo, double hi,
         double tolerance) {
        const auto r = muffin::golden_section(f, muffin::SearchInterval{lo, hi, tolerance});
        return py::make_tuple(r.argmin, r.min_value, r.evaluations);
      },
      py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("tolerance"));

  m.def(
      "auto_tau",
      [](double beta, double sigma, double mu_s, double mu_lambda,
         std::size_t basis_count) {
        return muffin::auto_tau(beta, sigma, mu_s, mu_lambda, basis_count);
      },
      py::arg("beta"), py::arg("sigma"), py::arg("mu_s"), py::arg("mu_lambda"),
      py::arg("basis_count") = 8);

  m.def(
      "read_cube",
      [](const std::filesystem::path& path) {
        const auto cube = muffin::cube_read(path);
        return py::make_tuple(FromCube(cube), cube.wavelengths());
      },
      py::arg("path"));
  m.def(
      "write_cube",
      [](const std::filesystem::path& path, const Array& array,
         std::vector<double> wavelengths) {
        muffin::cube_write(ToCube(array, std::move(wavelengths)), path);
      },
      py::arg("path"), py::arg("cube"), py::arg("wavelengths") = std::vector<double>{});

  py::class_<PyProblem>(m, "Problem")
      .def(py::init<const Array&, const Array&>(), py::arg("dirty"), py::arg("psf"))
      .def_property_readonly("bands", [](const PyProblem& p) { return p.problem.bands(); })
      .def_property_readonly("shape", [](const PyProblem& p) {
        return py::make_tuple(p.problem.bands(), p.problem.grid().height,
                              p.problem.grid().width);
      })
      .def_property_readonly("beta", [](const PyProblem& p) {
        return p.problem.psfs().max_norm_squared();
      });

  m.def(
      "fixed_run",
      [](const PyProblem& p, double mu_s, double mu_lambda, std::size_t iterations,
         double tau, double sigma, std::optional<double> noise_variance,
         std::optional<Array> truth, std::size_t workers, std::uint64_t probe_seed,
         bool record_rows) {
        std::optional<muffin::ImageCube> truth_cube;
        if (truth) truth_cube = ToCube(*truth);
        std::optional<muffin::NoiseModel> noise;
        if (noise_variance) noise = muffin::NoiseModel::uniform(p.problem.bands(), *noise_variance);
        const auto options = Options(tau, sigma, probe_seed,
                                     truth_cube ? &*truth_cube : nullptr, record_rows);
        muffin::RunResult result;
        {
          py::gil_scoped_release release;
          const muffin::WorkerPool pool(workers);
          result = muffin::fixed_run(p.problem, noise ? &*noise : nullptr,
                                     {muffin::Segment{iterations, mu_s, mu_lambda, 0}},
                                     options, pool);
        }
        return ResultToDict(result);
      },
      py::arg("problem"), py::arg("mu_s"), py::arg("mu_lambda"),
      py::arg("iterations"), py::arg("tau") = 1e-3, py::arg("sigma") = 10.0,
      py::arg("noise_variance") = py::none(), py::arg("truth") = py::none(),
      py::arg("workers") = 1, py::arg("probe_seed") = 1, py::arg("record_rows") = true);

  m.def(
      "self_tuned_run",
      [](const PyProblem& p, double noise_variance, std::size_t phase1,
         std::size_t phase2, std::size_t phase3, double mu_s_max,
         double mu_lambda_max, double rel_tolerance, double tau, double sigma,
         std::optional<Array> truth, std::size_t workers, std::uint64_t probe_seed,
         std::size_t lookahead) {
        std::optional<muffin::ImageCube> truth_cube;
        if (truth) truth_cube = ToCube(*truth);
        auto options = Options(tau, sigma, probe_seed,
                               truth_cube ? &*truth_cube : nullptr, true);
        options.lookahead = lookahead;
        const auto noise = muffin::NoiseModel::uniform(p.problem.bands(), noise_variance);
        muffin::TuneSchedule schedule{phase1, phase2, phase3, {}};
        muffin::RunResult result;
        {
          py::gil_scoped_release release;
          const muffin::WorkerPool pool(workers);
          result = muffin::self_tuned_run(
              p.problem, noise, schedule,
              muffin::SearchInterval::relative(0.0, mu_s_max, rel_tolerance),
              muffin::SearchInterval::relative(0.0, mu_lambda_max, rel_tolerance),
              options, pool);
        }
        return ResultToDict(result);
      },
      py::arg("problem"), py::arg("noise_variance"), py::arg("phase1") = 100,
      py::arg("phase2") = 100, py::arg("phase3") = 500, py::arg("mu_s_max") = 2.0,
      py::arg("mu_lambda_max") = 3.0, py::arg("rel_tolerance") = 1e-2,
      py::arg("tau") = 1e-3, py::arg("sigma") = 10.0, py::arg("truth") = py::none(),
      py::arg("workers") = 1, py::arg("probe_seed") = 1, py::arg("lookahead") = 1);

  m.def(
      "sweep_grid",
      [](const PyProblem& p, const Array& truth, std::vector<double> mu_s,
         std::vector<double> mu_lambda, std::size_t phase1, std::size_t phase2,
         std::size_t phase3, double tau, double sigma, std::size_t workers) {
        const auto truth_cube = ToCube(truth);
        const auto options = Options(tau, sigma, 1, &truth_cube, false);
        muffin::GridSweep sweep;
        {
          py::gil_scoped_release release;
          const muffin::WorkerPool pool(workers);
          sweep = muffin::sweep_grid(p.problem, truth_cube,
                                     muffin::TuneSchedule{phase1, phase2, phase3, {}},
                                     mu_s, mu_lambda, options, pool);
        }
        py::dict d;
        const py::ssize_t rows = static_cast<py::ssize_t>(sweep.mu_s.size());
        const py::ssize_t cols = static_cast<py::ssize_t>(sweep.mu_lambda.size());
        d["wmse"] = py::array_t<double>({rows, cols}, sweep.wmse.data());
        d["snr_db"] = py::array_t<double>({rows, cols}, sweep.snr_db.data());
        d["best"] = py::make_tuple(sweep.mu_s[sweep.best_s], sweep.mu_lambda[sweep.best_lambda]);
        return d;
      },
      py::arg("problem"), py::arg("truth"), py::arg("mu_s"), py::arg("mu_lambda"),
      py::arg("phase1") = 100, py::arg("phase2") = 100, py::arg("phase3") = 500,
      py::arg("tau") = 1e-3, py::arg("sigma") = 10.0, py::arg("workers") = 1);

  m.def(
      "oracle_search",
      [](const PyProblem& p, const Array& truth, std::size_t phase1,
         std::size_t phase2, std::size_t phase3, double mu_s_max,
         double mu_lambda_max, double rel_tolerance, double tau, double sigma,
         std::size_t workers) {
        const auto truth_cube = ToCube(truth);
        const auto options = Options(tau, sigma, 1, &truth_cube, false);
        muffin::OracleResult oracle;
        {
          py::gil_scoped_release release;
          const muffin::WorkerPool pool(workers);
          oracle = muffin::oracle_search(
              p.problem, truth_cube, muffin::TuneSchedule{phase1, phase2, phase3, {}},
              muffin::SearchInterval::relative(0.0, mu_s_max, rel_tolerance),
              muffin::SearchInterval::relative(0.0, mu_lambda_max, rel_tolerance),
              options, pool);
        }
        return py::make_tuple(oracle.mu_s, oracle.mu_lambda);
      },
      py::arg("problem"), py::arg("truth"), py::arg("phase1") = 100,
      py::arg("phase2") = 100, py::arg("phase3") = 500, py::arg("mu_s_max") = 2.0,
      py::arg("mu_lambda_max") = 3.0, py::arg("rel_tolerance") = 1e-2,
      py::arg("tau") = 1e-3, py::arg("sigma") = 10.0, py::arg("workers") = 1);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_json) {
        const auto config = muffin::parse_config(config_json);
        muffin::CommandOutput output;
        {
          py::gil_scoped_release release;
          if (command == "simulate") {
            output = muffin::cmd_simulate(config);
          } else if (command == "reconstruct") {
            output = muffin::cmd_reconstruct(config);
          } else if (command == "gridsearch") {
            output = muffin::cmd_gridsearch(config);
          } else {
            throw muffin::ConfigError("unknown command " + command);
          }
        }
        py::dict files;
        for (const auto& [role, path] : output.files) files[py::str(role)] = path.string();
        return files;
      },
      py::arg("command"), py::arg("config_json"));

  m.def("default_config", [] { return muffin::to_json(muffin::ExperimentConfig{}); });
}
