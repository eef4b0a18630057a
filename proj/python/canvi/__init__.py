"""Conformal prediction wrappers for amortized posterior approximators.

The native core exposes the benchmark simulators, the candidate posterior
families, split-conformal calibration, region-size estimation, and the full
selection pipeline. See the project README for the companion CLI.
"""

import json as _json

from canvi._core import (  # noqa: F401
    CalibratedPredictor,
    CandidateSpec,
    CanviConfig,
    CoveragePoint,
    DatasetRole,
    JointDataset,
    PosteriorModel,
    RngStream,
    SimulationError,
    Task,
    TaskSpec,
    TrainingError,
    arch_log_likelihood,
    assess_coverage,
    calibrate,
    conformal_quantile,
    counterexample_lengths,
    dispersion_scaled,
    gaussian_analytic_length,
    gaussian_analytic_threshold,
    hdr_threshold,
    inverse_efficiency,
    inverse_efficiency_grid,
    linear_gaussian,
    load_model,
    make_task,
    mdn_for_task,
    read_dataset_csv,
    region_size_grid,
    region_size_iw,
    run_canvi_predictor,
    sample_joint,
    save_model,
    score,
    std_normal_cdf,
    std_normal_quantile,
    task_names,
    train_favi,
    write_dataset_csv,
)
from canvi._core import run_canvi_json as _run_canvi_json


def run_canvi(config):
    """Run the selection pipeline; returns the report as a dictionary."""
    return _json.loads(_run_canvi_json(config))


__all__ = [name for name in dir() if not name.startswith("_")]
