"""Multi-step inertial forward-backward splitting for nonconvex composite problems."""

from .diagnostics import RateReport, fit_rate, predict_regime
from .exceptions import (
    InsufficientDataError,
    InvalidArgumentError,
    InvalidParameterError,
    MifbError,
    NumericalFailureError,
)
from .problem import CompositeProblem, NonsmoothTerm, SmoothTerm, objective_value
from .solver import AdmissibilityReport, MifbParams, compute_admissibility, preset, solve

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "CompositeProblem",
    "InsufficientDataError",
    "InvalidArgumentError",
    "InvalidParameterError",
    "MifbError",
    "MifbParams",
    "NonsmoothTerm",
    "NumericalFailureError",
    "RateReport",
    "SmoothTerm",
    "compute_admissibility",
    "fit_rate",
    "objective_value",
    "predict_regime",
    "preset",
    "solve",
]
