"""Functional inverse regression for sparse longitudinal covariates."""

from .data import FunctionOnGrid, LongitudinalDataset
from .edr import EdrFit, FunctionalSIR, fit_edr, project, sign_align
from .io import ingest_csv, write_csv
from .kernels import SmootherSpec, bandwidth_rule
from .link import LocalLinearRegressor, fit_link, predict_link
from .simulation import SimConfig, TrueModel, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "EdrFit",
    "FunctionOnGrid",
    "FunctionalSIR",
    "LocalLinearRegressor",
    "LongitudinalDataset",
    "SimConfig",
    "SmootherSpec",
    "TrueModel",
    "bandwidth_rule",
    "fit_edr",
    "fit_link",
    "ingest_csv",
    "predict_link",
    "project",
    "sign_align",
    "simulate_dataset",
    "write_csv",
]
