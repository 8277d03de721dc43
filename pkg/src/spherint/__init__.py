"""Rank-one spherical integrals and their large-N expansion."""

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInput,
    DegreeOverflow,
    DisagreementError,
    DomainError,
    GapError,
    IllConditioned,
    PositivityError,
    ShapeError,
    SpherintError,
    UnknownLaw,
)
from .spectra import Spectrum, ThetaWindow, TiltPoint, solve_v
from .expansion import ExpansionResult, coefficients, log_i_approx

__version__ = "0.1.0"

__all__ = [
    "Spectrum",
    "ThetaWindow",
    "TiltPoint",
    "solve_v",
    "ExpansionResult",
    "coefficients",
    "log_i_approx",
    "SpherintError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateInput",
    "DegreeOverflow",
    "DisagreementError",
    "DomainError",
    "GapError",
    "IllConditioned",
    "PositivityError",
    "ShapeError",
    "UnknownLaw",
]
