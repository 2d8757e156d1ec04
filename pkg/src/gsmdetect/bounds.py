"""Non-asymptotic bounds on the minimax separation radius.

The lower bound is ``sup_D min(c eps^2 sqrt(S_D), a_D^-2)`` and the upper
bound ``inf_D C eps^2 sqrt(S_D) + a_D^-2`` where ``S_D = sum_{j<=D} b_j^-4``.
Both optimizations are exact integer scans over ``D = 1..N``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .model import ProblemSpec

__all__ = [
    "ErrorBudget",
    "BoundsReport",
    "RatioCheck",
    "c_constant",
    "C_constant",
    "cumulative_b4",
    "lower_radius",
    "upper_radius",
    "hyp_ab_check",
    "compute_bounds",
    "TruncationWarning",
]


class TruncationWarning(UserWarning):
    """The optimizing bandwidth sits at the truncation ``N``."""


@dataclass(frozen=True)
class ErrorBudget:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    @property
    def degenerate(self) -> bool:
        return self.alpha + self.beta >= 1


def c_constant(budget: ErrorBudget) -> float:
    """``(2 ln(1 + 4 (1 - alpha - beta)^2))^(1/4)``, the lower-bound constant."""
    if budget.degenerate:
        raise ValueError(f"alpha + beta must be < 1 (got {budget.alpha + budget.beta})")
    gap = 1.0 - budget.alpha - budget.beta
    return (2.0 * math.log1p(4.0 * gap * gap)) ** 0.25


def C_constant(budget: ErrorBudget) -> float:
    """Upper-bound constant with ``x_g = ln(1/g)``:

    ``sqrt(2 x_b) + sqrt(2 (x_a + x_b)) + sqrt(2) (sqrt(x_a) + sqrt(x_b))^(1/2)``
    """
    xa = math.log(1.0 / budget.alpha)
    xb = math.log(1.0 / budget.beta)
    return (
        math.sqrt(2.0 * xb)
        + math.sqrt(2.0 * (xa + xb))
        + math.sqrt(2.0) * math.sqrt(math.sqrt(xa) + math.sqrt(xb))
    )


def cumulative_b4(spec: ProblemSpec, D: int) -> float:
    """``sum_{j=1}^D b_j^-4`` from the cached prefix sums."""
    if not 1 <= D <= spec.truncation:
        raise ValueError(f"bandwidth {D} outside [1, {spec.truncation}]")
    return float(spec.b_inv4_cumsum[D - 1])


def _noise_scale(spec: ProblemSpec) -> np.ndarray:
    # eps^2 sqrt(S_D) for D = 1..N
    return spec.noise**2 * np.sqrt(spec.b_inv4_cumsum)


def lower_radius(spec: ProblemSpec, budget: ErrorBudget) -> tuple[float, int]:
    """Squared lower bound and the smallest maximizing bandwidth ``D0``.

    A budget with ``alpha + beta >= 1`` gives the degenerate value 0 at D0 = 1.
    """
    if budget.degenerate:
        return 0.0, 1
    values = np.minimum(c_constant(budget) * _noise_scale(spec), spec.a**-2.0)
    d0 = int(np.argmax(values))  # first occurrence == smallest D
    return float(values[d0]), d0 + 1


def upper_radius(spec: ProblemSpec, budget: ErrorBudget, warn: bool = True) -> tuple[float, int]:
    """Squared upper bound and the smallest minimizing bandwidth ``D*``.

    Emits :class:`TruncationWarning` when ``D* == N``.
    """
    values = C_constant(budget) * _noise_scale(spec) + spec.a**-2.0
    d = int(np.argmin(values))
    if warn and d + 1 == spec.truncation:
        warnings.warn(f"upper bound minimized at the truncation N={spec.truncation}", TruncationWarning, stacklevel=2)
    return float(values[d]), d + 1


@dataclass(frozen=True)
class RatioCheck:
    satisfied: bool
    a_ratio_range: tuple[float, float]
    b_ratio_range: tuple[float, float]


def _unbounded_drift(ratios: np.ndarray) -> bool:
    # Consecutive log-ratios whose magnitude keeps growing in the second half
    # of the index range signal a ratio heading to 0 or infinity.
    logs = np.abs(np.log(ratios))
    half = len(logs) // 2
    if half < 1:
        return False
    head = logs[:half].max()
    tail = logs[half:].max()
    return bool(tail > head * (1 + 1e-9) + 1e-300)


def hyp_ab_check(spec: ProblemSpec) -> RatioCheck:
    """Scan ``a_{D-1}/a_D`` and ``b_{D-1}/b_D`` over ``D = 2..N``.

    Satisfied when ``a`` and ``1/b`` are non-decreasing, every ratio is finite
    and positive, and neither log-ratio sequence grows in magnitude towards the
    end of the scan (growth means the band degenerates as ``N -> infinity``,
    as for power-exponential sequences).
    """
    if spec.truncation < 3:
        raise ValueError("need N >= 3")
    a, b = spec.a, spec.b
    ra = a[:-1] / a[1:]
    rb = b[:-1] / b[1:]
    finite = bool(np.all(np.isfinite(ra)) and np.all(np.isfinite(rb)) and np.all(ra > 0) and np.all(rb > 0))
    monotone = bool(np.all(ra <= 1.0) and np.all(rb >= 1.0))
    ok = finite and monotone and not _unbounded_drift(ra) and not _unbounded_drift(rb)
    return RatioCheck(
        ok,
        (float(ra.min()), float(ra.max())),
        (float(rb.min()), float(rb.max())),
    )


@dataclass(frozen=True)
class BoundsReport:
    lower_radius_sq: float
    upper_radius_sq: float
    lower_bandwidth: int
    upper_bandwidth: int
    c_const: float
    C_const: float
    ratio: float
    hyp_ab_satisfied: bool
    truncation_binding: bool

    def to_dict(self) -> dict:
        return asdict(self)


def compute_bounds(spec: ProblemSpec, budget: ErrorBudget) -> BoundsReport:
    lo, d0 = lower_radius(spec, budget)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        up, dstar = upper_radius(spec, budget)
    hyp = hyp_ab_check(spec).satisfied if spec.truncation >= 3 else False
    return BoundsReport(
        lower_radius_sq=lo,
        upper_radius_sq=up,
        lower_bandwidth=d0,
        upper_bandwidth=dstar,
        c_const=c_constant(budget) if not budget.degenerate else 0.0,
        C_const=C_constant(budget),
        ratio=up / lo if lo > 0 else math.inf,
        hyp_ab_satisfied=hyp,
        truncation_binding=dstar == spec.truncation or d0 == spec.truncation,
    )
