"""Minimax signal detection in the Gaussian sequence model with ellipsoid smoothness."""

from importlib.metadata import PackageNotFoundError, version

from .bounds import BoundsReport, C_constant, ErrorBudget, c_constant, compute_bounds, lower_radius, upper_radius
from .extremal import ExtremalSolution, InfeasibleRadius, TruncationTooSmall, critical_radius, solve_extremal, u_of_r
from .model import ProblemSpec, RngStream, SequenceFamily, Signal, SignalClass, make_spec, simulate

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "BoundsReport",
    "C_constant",
    "ErrorBudget",
    "ExtremalSolution",
    "InfeasibleRadius",
    "ProblemSpec",
    "RngStream",
    "SequenceFamily",
    "Signal",
    "SignalClass",
    "TruncationTooSmall",
    "c_constant",
    "compute_bounds",
    "critical_radius",
    "lower_radius",
    "make_spec",
    "simulate",
    "solve_extremal",
    "u_of_r",
    "upper_radius",
    "__version__",
]
