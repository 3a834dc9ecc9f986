"""Multi-frequency radio image deconvolution with self-tuned regularization.

Cubes are float64 arrays shaped (bands, height, width).
"""

from ._core import (
    ConfigError,
    CubeError,
    DimensionError,
    NumericalError,
    Problem,
    apply_psf,
    auto_tau,
    default_config,
    fixed_run,
    golden_section,
    oracle_search,
    read_cube,
    run_command,
    self_tuned_run,
    simulate,
    snr_db,
    sweep_grid,
    true_wmse,
    wavelength_grid,
    write_cube,
)

__all__ = [
    "ConfigError",
    "CubeError",
    "DimensionError",
    "NumericalError",
    "Problem",
    "apply_psf",
    "auto_tau",
    "default_config",
    "fixed_run",
    "golden_section",
    "oracle_search",
    "read_cube",
    "run_command",
    "self_tuned_run",
    "simulate",
    "snr_db",
    "sweep_grid",
    "true_wmse",
    "wavelength_grid",
    "write_cube",
]
