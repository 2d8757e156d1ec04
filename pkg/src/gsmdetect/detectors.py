"""Spectral cut-off and Ingster tests with their threshold calibrations.

Every test exposes ``support`` (how many leading coordinates its statistic
reads), ``threshold`` and a vectorized ``statistic(Y)`` over the last axis;
``H0`` is rejected iff the statistic is strictly above the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.stats import norm

from .extremal import ExtremalSolution, ingster_filters, solve_extremal
from .model import ProblemSpec, RngStream

__all__ = [
    "Calibration",
    "SpectralTest",
    "IngsterTest",
    "TrivialTest",
    "TestOutcome",
    "spectral_statistic",
    "calibrate_spectral",
    "gaussian_spectral",
    "run_test",
    "run_spectral",
    "quantile_bound_constant",
    "select_bandwidth_Dtilde",
    "build_ingster",
    "ingster_statistic",
    "null_quantile",
    "MIN_CALIBRATION_SAMPLES",
    "DEFAULT_CALIBRATION_SAMPLES",
]

MIN_CALIBRATION_SAMPLES = 10_000
DEFAULT_CALIBRATION_SAMPLES = 200_000
_CHUNK_ELEMENTS = 4_000_000


class DetectionTest(Protocol):
    support: int
    threshold: float

    def statistic(self, Y: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Calibration:
    """How a threshold was obtained.

    ``kind`` is ``"monte-carlo"``, ``"gaussian-approx"`` (spectral) or
    ``"asymptotic-gaussian"`` (Ingster).  The Gaussian kinds are asymptotic
    and carry no seed.
    """

    kind: str
    samples: int = 0
    seed: int | None = None
    stream: int | None = None

    @property
    def asymptotic(self) -> bool:
        return self.kind != "monte-carlo"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "samples": self.samples, "seed": self.seed, "stream": self.stream}


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    threshold: float
    reject: bool

    __test__ = False  # not a pytest class


def _freeze(v: np.ndarray) -> np.ndarray:
    v = np.array(v, dtype=float)
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class SpectralTest:
    """``1{ sum_{j<=D} b_j^-2 (y_j^2 - eps^2) > t_{1-alpha,D} }``."""

    bandwidth: int
    threshold: float
    alpha: float
    calibration: Calibration
    eps: float
    weights: np.ndarray  # b_j^-2 for j <= D

    __test__ = False

    @property
    def support(self) -> int:
        return self.bandwidth

    def statistic(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        y = Y[..., : self.bandwidth]
        return (y * y - self.eps**2) @ self.weights

    def to_dict(self) -> dict:
        return {
            "type": "spectral",
            "bandwidth": self.bandwidth,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "eps": self.eps,
            "calibration": self.calibration.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class IngsterTest:
    """``1{ sum_j omega_j ((y_j / eps)^2 - 1) > t }`` with extremal filters ``omega``."""

    filters: np.ndarray
    threshold: float
    alpha: float
    calibration: Calibration
    eps: float
    radius: float
    solution: ExtremalSolution | None = field(default=None, repr=False)

    __test__ = False

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError("the Ingster statistic needs eps > 0")
        f = _freeze(self.filters)
        if np.any(f < 0):
            raise ValueError("filters must be non-negative")
        if abs(float(f @ f) - 0.5) > 1e-10:
            raise ValueError(f"filters must satisfy sum omega^2 = 1/2, got {float(f @ f)!r}")
        object.__setattr__(self, "filters", f)
        nz = np.flatnonzero(f)
        object.__setattr__(self, "_support", int(nz[-1]) + 1 if len(nz) else 1)

    @property
    def support(self) -> int:
        return self._support

    @property
    def omega0(self) -> float:
        return float(self.filters.max())

    def statistic(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        k = self.support
        z = Y[..., :k] / self.eps
        return (z * z - 1.0) @ self.filters[:k]

    def to_dict(self) -> dict:
        return {
            "type": "ingster",
            "radius": self.radius,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "eps": self.eps,
            "omega0": self.omega0,
            "calibration": self.calibration.to_dict(),
            "filters": self.filters.tolist(),
        }


@dataclass(frozen=True)
class TrivialTest:
    """Always (``reject=True``) or never rejects; the randomized-test edge cases."""

    reject: bool
    support: int = 1

    __test__ = False

    @property
    def threshold(self) -> float:
        return 0.0

    def statistic(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        return np.full(Y.shape[:-1], math.inf if self.reject else -math.inf)


def run_test(test: DetectionTest, Y: np.ndarray) -> TestOutcome:
    stat = float(test.statistic(np.asarray(Y, dtype=float)))
    return TestOutcome(stat, float(test.threshold), stat > test.threshold)


def spectral_statistic(spec: ProblemSpec, D: int, Y: np.ndarray) -> float:
    """``T_D = sum_{j=1}^D b_j^-2 (y_j^2 - eps^2)``."""
    Y = np.asarray(Y, dtype=float)
    if not 1 <= D <= spec.truncation:
        raise ValueError(f"bandwidth {D} outside [1, {spec.truncation}]")
    if Y.shape[-1] != spec.truncation:
        raise ValueError(f"observation length {Y.shape[-1]} != truncation {spec.truncation}")
    y = Y[..., :D]
    return (y * y - spec.noise**2) @ (spec.b[:D] ** -2.0)


def null_quantile(weights: np.ndarray, level: float, samples: int, rng: RngStream) -> float:
    """Type-7 quantile of ``sum_j w_j (xi_j^2 - 1)`` over ``samples`` draws."""
    weights = np.asarray(weights, dtype=float)
    draws = _null_draws(weights, samples, rng.generator())
    return float(np.quantile(draws, level))


def _null_draws(weights: np.ndarray, samples: int, gen: np.random.Generator) -> np.ndarray:
    k = len(weights)
    out = np.empty(samples)
    chunk = max(1, _CHUNK_ELEMENTS // max(k, 1))
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        xi = gen.standard_normal((n, k))
        out[start : start + n] = (xi * xi - 1.0) @ weights
    return out


def calibrate_spectral(
    spec: ProblemSpec,
    D: int,
    alpha: float,
    samples: int = DEFAULT_CALIBRATION_SAMPLES,
    rng: RngStream | None = None,
) -> SpectralTest:
    """Monte Carlo ``(1-alpha)``-quantile of ``eps^2 sum_{j<=D} b_j^-2 (xi_j^2 - 1)``.

    The draws do not depend on ``eps``, so with a fixed seed the threshold
    scales exactly as ``eps^2``.
    """
    if samples < MIN_CALIBRATION_SAMPLES:
        raise ValueError(f"need at least {MIN_CALIBRATION_SAMPLES} calibration samples, got {samples}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 1 <= D <= spec.truncation:
        raise ValueError(f"bandwidth {D} outside [1, {spec.truncation}]")
    rng = rng or RngStream(0)
    w = spec.b[:D] ** -2.0
    draws = spec.noise**2 * _null_draws(w, samples, rng.generator())
    threshold = float(np.quantile(draws, 1.0 - alpha))
    return SpectralTest(
        bandwidth=D,
        threshold=threshold,
        alpha=alpha,
        calibration=Calibration("monte-carlo", samples, rng.seed, rng.stream),
        eps=spec.noise,
        weights=_freeze(w),
    )


def gaussian_spectral(spec: ProblemSpec, D: int, alpha: float) -> SpectralTest:
    """Spectral test with the CLT threshold ``eps^2 sqrt(2 S_D) t_{1-alpha}``."""
    w = spec.b[:D] ** -2.0
    sd = spec.noise**2 * math.sqrt(2.0 * float(spec.b_inv4_cumsum[D - 1]))
    return SpectralTest(D, sd * float(norm.ppf(1.0 - alpha)), alpha, Calibration("gaussian-approx"), spec.noise, _freeze(w))


def run_spectral(test: SpectralTest, Y: np.ndarray) -> TestOutcome:
    return run_test(test, Y)


def quantile_bound_constant(spec: ProblemSpec, D: int, alpha: float) -> float:
    """``C(alpha)`` with ``t_{1-alpha,D} <= C(alpha) eps^2 sqrt(S_D)``.

    From the weighted chi-square deviation bound
    ``P(sum w_j (xi_j^2 - 1) >= 2 |w|_2 sqrt(x) + 2 |w|_inf x) <= exp(-x)``
    with ``x = ln(1/alpha)``:
    ``C(alpha) = 2 sqrt(x) + 2 x max_{j<=D} b_j^-2 / sqrt(S_D)``.
    """
    x = math.log(1.0 / alpha)
    s = float(spec.b_inv4_cumsum[D - 1])
    return 2.0 * math.sqrt(x) + 2.0 * x * float(np.max(spec.b[:D] ** -2.0)) / math.sqrt(s)


class BandwidthRuleError(ValueError):
    """No bandwidth satisfies the rule at this radius."""


def select_bandwidth_Dtilde(spec: ProblemSpec, alpha: float, r: float, C_alpha: float | None = None) -> int:
    """Largest ``D`` with ``C(alpha) eps^2 sqrt(S_D) + a_D^-2 <= r^2 / 2``.

    With ``C_alpha=None`` the per-bandwidth deviation constant from
    :func:`quantile_bound_constant` is used.
    """
    S = np.asarray(spec.b_inv4_cumsum)
    noise = spec.noise**2 * np.sqrt(S)
    if C_alpha is None:
        x = math.log(1.0 / alpha)
        running_max = np.maximum.accumulate(spec.b**-2.0)
        lhs = spec.noise**2 * (2.0 * math.sqrt(x) * np.sqrt(S) + 2.0 * x * running_max)
    else:
        lhs = C_alpha * noise
    ok = np.flatnonzero(lhs + spec.a**-2.0 <= 0.5 * r * r)
    if len(ok) == 0:
        raise BandwidthRuleError(f"radius too small for bandwidth rule at r={r:.6g}")
    return int(ok[-1]) + 1


def build_ingster(
    spec: ProblemSpec,
    r: float,
    alpha: float,
    calibration: str = "asymptotic-gaussian",
    samples: int = DEFAULT_CALIBRATION_SAMPLES,
    rng: RngStream | None = None,
    strict: bool | None = None,
) -> IngsterTest:
    """Ingster test at radius ``r``.

    ``calibration="asymptotic-gaussian"`` uses the standard normal quantile;
    ``"monte-carlo"`` replaces it with the empirical null quantile of the
    statistic.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    sol = solve_extremal(spec, r, strict=strict)
    omega = ingster_filters(sol)
    if calibration == "asymptotic-gaussian":
        threshold = float(norm.ppf(1.0 - alpha))
        cal = Calibration("asymptotic-gaussian")
    elif calibration == "monte-carlo":
        if samples < MIN_CALIBRATION_SAMPLES:
            raise ValueError(f"need at least {MIN_CALIBRATION_SAMPLES} calibration samples, got {samples}")
        rng = rng or RngStream(0)
        k = int(np.flatnonzero(omega)[-1]) + 1
        threshold = null_quantile(omega[:k], 1.0 - alpha, samples, rng)
        cal = Calibration("monte-carlo", samples, rng.seed, rng.stream)
    else:
        raise ValueError(f"unknown calibration {calibration!r}")
    return IngsterTest(omega, threshold, alpha, cal, spec.noise, float(r), sol)


def ingster_statistic(test: IngsterTest, spec: ProblemSpec, Y: np.ndarray) -> float:
    """``T = sum_j omega_j ((y_j / eps)^2 - 1)``."""
    if spec.noise <= 0:
        raise ValueError("the Ingster statistic needs eps > 0")
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] != spec.truncation or len(test.filters) != spec.truncation:
        raise ValueError("observation, filter and truncation lengths must agree")
    z = Y / spec.noise
    return (z * z - 1.0) @ test.filters
