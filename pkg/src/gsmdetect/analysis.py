"""Asymptotic checks: rate exponents, the u-trichotomy, Gaussian shapes and powerfulness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .bounds import C_constant, ErrorBudget, lower_radius, upper_radius
from .detectors import build_ingster, calibrate_spectral, select_bandwidth_Dtilde
from .extremal import InfeasibleRadius, TruncationTooSmall, critical_radius, solve_extremal
from .mc import PowerEstimate, default_adversaries, estimate_beta, estimate_beta_at
from .model import MAX_TRUNCATION, ProblemSpec, RngStream, make_spec

__all__ = [
    "FamilySpec",
    "RateFit",
    "RegimePoint",
    "RegimeReport",
    "ShapeCheck",
    "PowerfulRow",
    "GenCondResult",
    "rate_exponent",
    "net_u_exponent",
    "spec_for_bounds",
    "spec_for_radius",
    "fit_rate",
    "regime_scan",
    "gaussian_shape_check",
    "spectral_shape_check",
    "balancing_R",
    "rho_sq",
    "powerful_check",
    "gen_cond_check",
    "REGIME_SLOPE",
]

REGIME_SLOPE = 0.2
GEN_COND_MIN_DELTA = 0.01
_START_N = 256


@dataclass(frozen=True)
class FamilySpec:
    """A problem family indexed by the noise level: ``a_j = j^s`` and ``b`` from ``family``."""

    family: str
    s: float
    t: float

    def at(self, eps: float, truncation: int) -> ProblemSpec:
        return make_spec(self.family, self.s, self.t, eps, truncation)

    @property
    def polynomial(self) -> bool:
        return self.family in ("direct", "mild")

    @property
    def effective_t(self) -> float:
        return 0.0 if self.family == "direct" else self.t

    def max_truncation(self) -> int:
        if self.family == "severe" and self.t > 0:
            # keep b_j^-4 = exp(4 t j) inside double range
            return max(2, min(MAX_TRUNCATION, int(690.0 / (4.0 * self.t))))
        return MAX_TRUNCATION


def rate_exponent(s: float, t: float) -> float:
    """``2s / (2s + 2t + 1/2)``: exponent of the separation rate in ``eps``."""
    return 2.0 * s / (2.0 * s + 2.0 * t + 0.5)


def net_u_exponent(s: float, t: float, radius_exponent: float) -> float:
    """Exponent of ``eps`` in ``u_eps(r)`` when ``r = eps^radius_exponent``.

    ``u^2 ~ eps^-4 r^((4s+4t+1)/s)``, so the exponent of ``u`` is half of that.
    """
    return 0.5 * (-4.0 + radius_exponent * (4.0 * s + 4.0 * t + 1.0) / s)


def spec_for_bounds(fam: FamilySpec, eps: float, budget: ErrorBudget) -> ProblemSpec:
    """Grow ``N`` until both optimizing bandwidths sit well inside ``1..N``."""
    cap = fam.max_truncation()
    n = min(_START_N, cap)
    while True:
        spec = fam.at(eps, n)
        _, d0 = lower_radius(spec, budget)
        _, dstar = upper_radius(spec, budget, warn=False)
        if max(d0, dstar) * 4 <= n or n >= cap:
            return spec
        n = min(4 * n, cap)


def spec_for_radius(fam: FamilySpec, eps: float, r: float) -> ProblemSpec:
    """Grow ``N`` until the extremal solution at ``r`` leaves coordinate ``N`` inactive."""
    cap = fam.max_truncation()
    n = min(_START_N, cap)
    while True:
        spec = fam.at(eps, n)
        if n >= cap or not solve_extremal(spec, r, strict=False).truncation_binding:
            return spec
        n = min(4 * n, cap)


def _critical_radius_auto(fam: FamilySpec, eps: float, level: float) -> float:
    cap = fam.max_truncation()
    n = min(_START_N, cap)
    while True:
        spec = fam.at(eps, n)
        try:
            return critical_radius(spec, level, strict=n < cap)
        except TruncationTooSmall:
            n = min(4 * n, cap)


@dataclass(frozen=True)
class RateFit:
    which: str
    eps_grid: list[float]
    values: list[float]
    slope: float
    intercept: float
    max_residual: float
    expected: float

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.expected) / abs(self.expected)

    def passes(self, rtol: float = 0.05) -> bool:
        return self.relative_error <= rtol

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "eps_grid": list(self.eps_grid),
            "values": list(self.values),
            "exponent_fitted": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "exponent_expected": self.expected,
            "relative_error": self.relative_error,
            "pass": self.passes(),
        }


def _loglog_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


def _check_grid(eps_grid: Sequence[float]) -> list[float]:
    grid = sorted(float(e) for e in eps_grid)
    if len(grid) < 5:
        raise ValueError("degenerate grid: need at least 5 noise levels")
    if any(e <= 0 for e in grid):
        raise ValueError("noise levels must be positive")
    if math.log10(grid[-1] / grid[0]) < 2.0 - 1e-9:
        raise ValueError("degenerate grid: noise levels must span at least two decades")
    return grid


def fit_rate(
    fam: FamilySpec,
    budget: ErrorBudget,
    eps_grid: Sequence[float],
    which: str = "upper",
    level: float = 1.0,
) -> RateFit:
    """Fit the log-log slope of a separation quantity against ``eps``.

    ``which`` is ``"lower"`` or ``"upper"`` (squared radii from the bounds) or
    ``"u-critical-radius"`` (the radius with ``u_eps(r) = level``).
    """
    if not fam.polynomial:
        raise ValueError("rate fitting needs a polynomial family")
    grid = _check_grid(eps_grid)
    kappa = rate_exponent(fam.s, fam.effective_t)
    values = []
    for eps in grid:
        if which in ("lower", "upper"):
            spec = spec_for_bounds(fam, eps, budget)
            v = lower_radius(spec, budget)[0] if which == "lower" else upper_radius(spec, budget, warn=False)[0]
        elif which == "u-critical-radius":
            v = _critical_radius_auto(fam, eps, level)
        else:
            raise ValueError(f"unknown quantity {which!r}")
        values.append(float(v))
    expected = 2.0 * kappa if which in ("lower", "upper") else kappa
    slope, intercept, resid = _loglog_fit(grid, values)
    return RateFit(which, grid, values, slope, intercept, resid, expected)


@dataclass(frozen=True)
class RegimePoint:
    eps: float
    radius: float
    u: float | None
    omega0: float | None
    error: str | None = None


@dataclass(frozen=True)
class RegimeReport:
    points: list[RegimePoint]
    slope: float
    regime: str

    @property
    def u_values(self) -> list[float | None]:
        return [p.u for p in self.points]

    @property
    def omega0_values(self) -> list[float | None]:
        return [p.omega0 for p in self.points]

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "u_slope": self.slope,
            "points": [p.__dict__ for p in self.points],
        }


def regime_scan(
    fam: FamilySpec, radius_rule: Callable[[float], float], eps_grid: Sequence[float]
) -> RegimeReport:
    """Tabulate ``u_eps(r(eps))`` and ``omega_0`` and classify the trend as ``eps -> 0``.

    The log-log slope of ``u`` against ``eps`` decides: above ``+REGIME_SLOPE``
    ``u`` vanishes (degenerate), below ``-REGIME_SLOPE`` it diverges
    (consistent), otherwise it stays bounded (critical).
    """
    points = []
    for eps in sorted(float(e) for e in eps_grid):
        r = float(radius_rule(eps))
        try:
            spec = spec_for_radius(fam, eps, r)
            sol = solve_extremal(spec, r, strict=False)
            points.append(RegimePoint(eps, r, sol.u_eps, sol.omega0))
        except (InfeasibleRadius, ValueError) as exc:
            points.append(RegimePoint(eps, r, None, None, str(exc)))
    ok = [p for p in points if p.u is not None and p.u > 0]
    if len(ok) < 2:
        return RegimeReport(points, math.nan, "undetermined")
    slope, _, _ = _loglog_fit([p.eps for p in ok], [p.u for p in ok])
    if slope > REGIME_SLOPE:
        regime = "degenerate"
    elif slope < -REGIME_SLOPE:
        regime = "consistent"
    else:
        regime = "critical"
    return RegimeReport(points, slope, regime)


@dataclass(frozen=True)
class ShapeCheck:
    lhs: PowerEstimate
    rhs: float
    u: float
    omega0: float
    radius: float
    extra: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.lhs.probability - self.rhs

    def to_dict(self) -> dict:
        return {"lhs": self.lhs.to_dict(), "rhs": self.rhs, "u": self.u, "omega0": self.omega0, "radius": self.radius, **self.extra}


def gaussian_shape_check(
    spec: ProblemSpec,
    r: float,
    alpha: float,
    samples: int,
    rng: RngStream,
    calibration: str = "asymptotic-gaussian",
    calibration_samples: int = 200_000,
) -> ShapeCheck:
    """MC type-II error of the Ingster test at ``theta_bar(r)`` against ``Phi(t_{1-alpha} - u_eps(r))``."""
    test = build_ingster(spec, r, alpha, calibration, calibration_samples, rng.child(1), strict=False)
    sol = test.solution
    lhs = estimate_beta_at(test, spec, sol.theta_bar, samples, rng.child(0))
    rhs = float(norm.cdf(norm.ppf(1.0 - alpha) - sol.u_eps))
    return ShapeCheck(lhs, rhs, sol.u_eps, sol.omega0, float(r), {"threshold": test.threshold})


def spectral_shape_check(
    spec: ProblemSpec,
    r: float,
    budget: ErrorBudget,
    samples: int,
    rng: RngStream,
    h: float | None = None,
    calibration_samples: int = 200_000,
) -> ShapeCheck:
    """Candidate-sup type-II error of the spectral test at ``D~`` against
    ``Phi(t_{1-alpha} - (1-h) a_D~^-2 / (eps^2 sqrt(S_D~)))`` with ``h = D~^(-1/8)`` by default.
    """
    D = select_bandwidth_Dtilde(spec, budget.alpha, r)
    h = D ** -0.125 if h is None else h
    test = calibrate_spectral(spec, D, budget.alpha, calibration_samples, rng.child(1))
    adv = default_adversaries(spec, budget, r)
    lhs = estimate_beta(test, spec, adv, samples, rng.child(0))
    snr = spec.a[D - 1] ** -2.0 / (spec.noise**2 * math.sqrt(float(spec.b_inv4_cumsum[D - 1])))
    rhs = float(norm.cdf(norm.ppf(1.0 - budget.alpha) - (1.0 - h) * snr))
    sol = solve_extremal(spec, r, strict=False)
    return ShapeCheck(lhs, rhs, sol.u_eps, sol.omega0, float(r), {"bandwidth": D, "h": h, "snr": snr})


def balancing_R(s: float, t: float, eps: float, C0: float, c_prime: float) -> float:
    """Minimizer over real ``R >= 2`` of ``max(C0 R^-2s, c' eps^2 R^(2t+1/2))``."""
    R = (C0 / (c_prime * eps**2)) ** (1.0 / (2.0 * s + 2.0 * t + 0.5))
    return max(2.0, R)


def rho_sq(s: float, t: float, eps: float, C0: float, c_prime: float) -> float:
    R = balancing_R(s, t, eps, C0, c_prime)
    return max(C0 * R ** (-2.0 * s), c_prime * eps**2 * R ** (2.0 * t + 0.5))


@dataclass(frozen=True)
class PowerfulRow:
    eps: float
    rho: float
    R: float
    probes: list[tuple[float, PowerEstimate]]
    smallest_C: float | None

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "rho": self.rho,
            "R": self.R,
            "smallest_C": self.smallest_C,
            "probes": [{"C": c, **e.to_dict()} for c, e in self.probes],
        }


def powerful_check(
    fam: FamilySpec,
    budget: ErrorBudget,
    eps_grid: Sequence[float],
    samples: int = 50_000,
    rng: RngStream | None = None,
    C0: float = 1.0,
    c_prime: float | None = None,
    multipliers: Sequence[float] = (1, 2, 4, 8, 16),
    calibration: str = "monte-carlo",
    calibration_samples: int = 200_000,
) -> list[PowerfulRow]:
    """Per ``eps``: the Ingster test built at ``rho_eps``, probed at ``theta_bar(C rho_eps)``.

    ``c_prime`` defaults to ``C(alpha, beta)``.  Probing stops at the first
    multiplier with ``beta_hat <= beta`` or when ``C rho_eps`` leaves the
    feasible range.
    """
    if not fam.polynomial:
        raise ValueError("powerfulness check needs a polynomial family")
    rng = rng or RngStream(0)
    cp = C_constant(budget) if c_prime is None else c_prime
    t = fam.effective_t
    rows = []
    for i, eps in enumerate(eps_grid):
        R = balancing_R(fam.s, t, eps, C0, cp)
        rho = math.sqrt(rho_sq(fam.s, t, eps, C0, cp))
        spec = spec_for_radius(fam, eps, rho)
        stream = rng.child(i)
        test = build_ingster(spec, rho, budget.alpha, calibration, calibration_samples, stream.child(0), strict=False)
        probes = []
        found = None
        for k, C in enumerate(multipliers):
            r = C * rho
            if r >= 1.0 / spec.a[0]:
                break
            theta = solve_extremal(spec, r, strict=False).theta_bar
            est = estimate_beta_at(test, spec, theta, samples, stream.child(k + 1))
            probes.append((float(C), est))
            if est.probability <= budget.beta:
                found = float(C)
                break
        rows.append(PowerfulRow(float(eps), rho, R, probes, found))
    return rows


@dataclass(frozen=True)
class GenCondResult:
    satisfied: bool
    slope: float
    delta: float
    ratios: list[float]


def gen_cond_check(fam: FamilySpec, D_grid: Sequence[int]) -> GenCondResult:
    """Log-log slope of ``max_{j<=D} b_j^-2 / sqrt(S_D)`` against ``D``.

    Satisfied when the slope is at most ``-GEN_COND_MIN_DELTA``; the reported
    ``delta`` is minus the slope.
    """
    grid = [int(d) for d in D_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise ValueError("D_grid must be increasing positive integers")
    spec = fam.at(1.0, max(grid[-1], 2))
    binv2 = spec.b**-2.0
    running = np.maximum.accumulate(binv2)
    ratios = [float(running[d - 1] / math.sqrt(spec.b_inv4_cumsum[d - 1])) for d in grid]
    slope, _, _ = _loglog_fit(grid, ratios)
    return GenCondResult(bool(-slope >= GEN_COND_MIN_DELTA), slope, -slope, ratios)
