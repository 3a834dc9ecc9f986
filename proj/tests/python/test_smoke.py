import json

import numpy as np
import pytest

import muffin


@pytest.fixture(scope="module")
def data():
    return muffin.simulate(width=16, height=16, bands=3, fill=0.25, snr_db=10.0)


def test_simulate_shapes(data):
    assert data["sky"].shape == (3, 16, 16)
    assert data["psf"].shape == (3, 16, 16)
    assert data["dirty"].shape == (3, 16, 16)
    assert len(data["variances"]) == 3
    assert 9.0 < data["realized_snr_db"] < 11.0
    assert np.allclose(data["psf"][:, 0, 0], 1.0)
    assert data["wavelengths"] == pytest.approx([1.0, 1.5, 2.0])


def test_apply_psf_matches_clean(data):
    clean = muffin.apply_psf(data["psf"], data["sky"])
    np.testing.assert_array_equal(clean, data["clean"])


def test_metrics(data):
    sky = data["sky"]
    assert muffin.true_wmse(sky, sky, data["psf"]) == 0.0
    assert muffin.snr_db(np.zeros_like(sky), sky) == pytest.approx(0.0)


def test_golden_section():
    argmin, value, evaluations = muffin.golden_section(lambda m: (m - 1.0) ** 2, 0.0, 3.0, 1e-3)
    assert abs(argmin - 1.0) <= 1e-3
    assert value == pytest.approx((argmin - 1.0) ** 2)
    assert evaluations <= 2 + 17


def test_fixed_run_tracks_psure(data):
    problem = muffin.Problem(data["dirty"], data["psf"])
    assert problem.shape == (3, 16, 16)
    tau = muffin.auto_tau(problem.beta, 10.0, 0.5, 0.5)
    run = muffin.fixed_run(problem, 0.5, 0.5, 20, tau=tau,
                           noise_variance=data["variances"][0], truth=data["sky"])
    assert run["estimate"].shape == (3, 16, 16)
    assert (run["estimate"] >= 0).all()
    rows = run["rows"]
    assert list(rows["iteration"]) == list(range(1, 21))
    assert np.isfinite(rows["wmse"]).all()
    assert np.isfinite(rows["wmse_hat"]).all()


def test_self_tuned_run(data):
    problem = muffin.Problem(data["dirty"], data["psf"])
    tau = muffin.auto_tau(problem.beta, 10.0, 2.0, 3.0)
    run = muffin.self_tuned_run(problem, data["variances"][0], phase1=4, phase2=4,
                                phase3=4, tau=tau, truth=data["sky"])
    assert run["phase1_end"] == 4
    assert run["phase2_end"] == 8
    assert 0.0 <= run["mu_s"] <= 2.0
    assert 0.0 <= run["mu_lambda"] <= 3.0
    assert (run["rows"]["mu_lambda"][:4] == 0).all()


def test_workers_do_not_change_results(data):
    problem = muffin.Problem(data["dirty"], data["psf"])
    one = muffin.fixed_run(problem, 0.3, 0.6, 10, workers=1)
    three = muffin.fixed_run(problem, 0.3, 0.6, 10, workers=3)
    np.testing.assert_array_equal(one["estimate"], three["estimate"])


def test_cube_round_trip(tmp_path, data):
    path = tmp_path / "sky.cube"
    muffin.write_cube(str(path), data["sky"], data["wavelengths"])
    cube, wavelengths = muffin.read_cube(str(path))
    np.testing.assert_array_equal(cube, data["sky"])
    assert wavelengths == data["wavelengths"]


def test_errors(data):
    with pytest.raises(muffin.DimensionError):
        muffin.Problem(data["dirty"], data["psf"][:2])
    with pytest.raises(muffin.ConfigError):
        muffin.run_command("simulate", json.dumps({"bogus": 1}))
    with pytest.raises(muffin.CubeError):
        muffin.read_cube("/nonexistent/path.cube")


def test_run_command(tmp_path):
    config = json.loads(muffin.default_config())
    config["paths"]["output"] = str(tmp_path / "sim")
    config["simulation"].update(width=16, height=16, bands=2)
    files = muffin.run_command("simulate", json.dumps(config))
    assert set(files) == {"sky", "psf", "dirty", "manifest"}
