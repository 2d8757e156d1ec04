"""Monte Carlo estimates of error probabilities and the lower-bound likelihood ratio.

Only the leading ``test.support`` coordinates are simulated: the statistics
never read beyond them, and the remaining observations are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bounds import ErrorBudget, c_constant, lower_radius, upper_radius
from .detectors import DetectionTest
from .extremal import solve_extremal
from .model import ProblemSpec, RngStream, Signal, SignalClass, class_contains

__all__ = [
    "PowerEstimate",
    "AdversarySet",
    "PriorSpec",
    "SecondMoment",
    "RadiusResult",
    "simulate_statistics",
    "estimate_size",
    "estimate_beta",
    "estimate_beta_at",
    "default_adversaries",
    "build_theta0",
    "likelihood_second_moment",
    "lower_bound_beta",
    "empirical_radius",
    "MIN_SAMPLES",
    "DEFAULT_PROBE_SAMPLES",
]

MIN_SAMPLES = 10_000
DEFAULT_PROBE_SAMPLES = 50_000
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class PowerEstimate:
    """Rejection or acceptance frequency with a 3-SE binomial half-width."""

    probability: float
    half_width: float
    samples: int
    seed: int
    label: str = "point"
    argmax: int | None = None

    @classmethod
    def from_count(cls, count: int, samples: int, seed: int, label: str = "point", argmax: int | None = None):
        p = count / samples
        return cls(p, 3.0 * math.sqrt(p * (1.0 - p) / samples), samples, seed, label, argmax)

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "half_width": self.half_width,
            "samples": self.samples,
            "seed": self.seed,
            "label": self.label,
            "argmax": self.argmax,
        }


@dataclass(frozen=True)
class AdversarySet:
    """Finite stand-in for the supremum over ``Theta_a(r)``."""

    candidates: tuple[Signal, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        cands = tuple(self.candidates)
        if not cands:
            raise ValueError("adversary set must be nonempty")
        labels = tuple(self.labels) or tuple(f"candidate-{i}" for i in range(len(cands)))
        if len(labels) != len(cands):
            raise ValueError("one label per candidate")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "labels", labels)

    def check(self, cls: SignalClass) -> None:
        for lab, c in zip(self.labels, self.candidates):
            if not class_contains(cls, c):
                raise ValueError(f"candidate {lab} is outside the alternative at r={cls.radius}")


@dataclass(frozen=True)
class PriorSpec:
    """Symmetric product prior ``prod_j (delta_{-theta_j} + delta_{theta_j}) / 2``."""

    base_signal: Signal
    description: str = ""
    radius: float | None = None


@dataclass(frozen=True)
class SecondMoment:
    """``E_0[L^2] = prod cosh(b_j^2 theta_j^2 / eps^2)`` and its ``exp(u^2)`` bound, with logs."""

    log_value: float
    log_bound: float

    @property
    def value(self) -> float:
        return _safe_exp(self.log_value)

    @property
    def bound(self) -> float:
        return _safe_exp(self.log_bound)

    @property
    def u_sq(self) -> float:
        return self.log_bound


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


@dataclass(frozen=True)
class RadiusResult:
    """Outcome of the radius bisection.

    ``status`` is ``"bracketed"``, ``"below-range"`` (already separating at the
    smallest probe, reported as radius 0) or ``"no-bracket"`` (never separating;
    ``radius`` is ``None`` and ``boundary`` is the largest radius probed).
    """

    radius: float | None
    bracket: tuple[float, float]
    status: str
    target: float
    probes: list[tuple[float, PowerEstimate]] = field(default_factory=list)
    boundary: float | None = None


def simulate_statistics(
    test: DetectionTest, spec: ProblemSpec, theta: Signal | np.ndarray, samples: int, gen: np.random.Generator
) -> np.ndarray:
    """``samples`` draws of ``test.statistic`` under ``P_theta``."""
    theta = theta.coefficients if isinstance(theta, Signal) else np.asarray(theta, dtype=float)
    k = min(int(test.support), spec.truncation)
    mean = spec.b[:k] * theta[:k]
    out = np.empty(samples)
    chunk = max(1, _CHUNK_ELEMENTS // k)
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        Y = mean + spec.noise * gen.standard_normal((n, k))
        out[start : start + n] = test.statistic(Y)
    return out


def _reject_count(test, spec, theta, samples, rng: RngStream) -> int:
    stats = simulate_statistics(test, spec, theta, samples, rng.generator())
    return int(np.count_nonzero(stats > test.threshold))


def estimate_size(test: DetectionTest, spec: ProblemSpec, samples: int, rng: RngStream) -> PowerEstimate:
    """Rejection frequency under ``theta = 0``."""
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    count = _reject_count(test, spec, np.zeros(spec.truncation), samples, rng)
    return PowerEstimate.from_count(count, samples, rng.seed, "size")


def estimate_beta_at(test: DetectionTest, spec: ProblemSpec, theta: Signal, samples: int, rng: RngStream) -> PowerEstimate:
    """Non-rejection frequency at a single signal."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    count = samples - _reject_count(test, spec, theta, samples, rng)
    return PowerEstimate.from_count(count, samples, rng.seed, "point")


def estimate_beta(
    test: DetectionTest, spec: ProblemSpec, adversaries: AdversarySet, samples: int, rng: RngStream
) -> PowerEstimate:
    """Largest non-rejection frequency over the candidates.

    Candidate ``i`` uses the child stream ``i``.  This is a lower bound on the
    true maximal type-II error and is labelled ``candidate-sup``.
    """
    best = None
    for i, theta in enumerate(adversaries.candidates):
        est = estimate_beta_at(test, spec, theta, samples, rng.child(i))
        if best is None or est.probability > best[1].probability:
            best = (i, est)
    i, est = best
    return PowerEstimate(est.probability, est.half_width, samples, rng.seed, "candidate-sup", i)


def build_theta0(spec: ProblemSpec, budget: ErrorBudget, D: int) -> tuple[Signal, float]:
    """``theta0_j = r b_j^-2 / sqrt(S_D)`` for ``j <= D`` with ``r^2 = c eps^2 sqrt(S_D)``."""
    if not 1 <= D <= spec.truncation:
        raise ValueError(f"bandwidth {D} outside [1, {spec.truncation}]")
    S = float(spec.b_inv4_cumsum[D - 1])
    r = math.sqrt(c_constant(budget) * spec.noise**2 * math.sqrt(S))
    theta = np.zeros(spec.truncation)
    theta[:D] = r * spec.b[:D] ** -2.0 / math.sqrt(S)
    return Signal(theta), r


def _flat_signal(spec: ProblemSpec, D: int, r: float) -> Signal:
    S = float(spec.b_inv4_cumsum[D - 1])
    theta = np.zeros(spec.truncation)
    theta[:D] = r * spec.b[:D] ** -2.0 / math.sqrt(S)
    return Signal(theta)


def default_adversaries(spec: ProblemSpec, budget: ErrorBudget, r: float) -> AdversarySet:
    """``theta_bar(r)``, the flat signals at ``D0`` and ``D*`` rescaled to norm ``r``,
    and a spike at the last coordinate the ellipsoid allows.  Candidates that
    fall outside ``Theta_a(r)`` are dropped.
    """
    cls = SignalClass(spec, r)
    cands: list[Signal] = []
    labels: list[str] = []
    sol = solve_extremal(spec, r, strict=False)
    cands.append(sol.theta_bar)
    labels.append("theta_bar")
    _, d0 = lower_radius(spec, budget)
    _, dstar = upper_radius(spec, budget, warn=False)
    for name, D in (("flat_D0", d0), ("flat_Dstar", dstar)):
        s = _flat_signal(spec, D, r)
        if class_contains(cls, s):
            cands.append(s)
            labels.append(name)
    feasible = np.flatnonzero(spec.a**2 * r * r <= 1.0)
    if len(feasible):
        m = int(feasible[-1])
        spike = np.zeros(spec.truncation)
        spike[m] = r
        s = Signal(spike)
        if class_contains(cls, s):
            cands.append(s)
            labels.append(f"spike_{m + 1}")
    return AdversarySet(tuple(cands), tuple(labels))


def likelihood_second_moment(spec: ProblemSpec, prior: PriorSpec) -> SecondMoment:
    """Exact ``log prod cosh(b^2 theta^2 / eps^2)`` and the bound ``u^2 = sum (b^2 theta^2)^2 / (2 eps^4)``."""
    theta = prior.base_signal.coefficients
    if len(theta) != spec.truncation:
        raise ValueError(f"signal length {len(theta)} != truncation {spec.truncation}")
    if spec.noise <= 0:
        raise ValueError("likelihood ratio needs eps > 0")
    x = spec.b**2 * theta**2 / spec.noise**2
    # log cosh(x) = x + log1p(exp(-2x)) - log 2, stable for large x
    log_cosh = x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)
    small = x < 1e-4
    log_cosh[small] = 0.5 * x[small] ** 2 - x[small] ** 4 / 12.0
    return SecondMoment(float(log_cosh.sum()), float(0.5 * np.sum(x * x)))


def lower_bound_beta(spec: ProblemSpec, prior: PriorSpec, alpha: float, use_bound: bool = True) -> float:
    """``max(0, 1 - alpha - sqrt(E_0[L^2] - 1) / 2)``.

    With ``use_bound`` the second moment is replaced by its ``exp(u^2)`` upper
    bound, which keeps the result a valid lower bound.
    """
    m = likelihood_second_moment(spec, prior)
    log_e = m.log_bound if use_bound else m.log_value
    excess = math.expm1(log_e) if log_e < 709.0 else math.inf
    value = 1.0 - alpha - 0.5 * math.sqrt(max(excess, 0.0))
    return max(0.0, value)


def empirical_radius(
    test_builder: Callable[[float], DetectionTest],
    spec: ProblemSpec,
    budget: ErrorBudget,
    samples: int = DEFAULT_PROBE_SAMPLES,
    rng: RngStream | None = None,
    r_range: tuple[float, float] | None = None,
    rtol: float = 0.02,
    on_probe: Callable[[float, PowerEstimate], None] | None = None,
) -> RadiusResult:
    """Smallest ``r`` with ``beta_hat(theta_bar(r)) <= beta`` by geometric bisection.

    ``test_builder(r)`` returns the test used at radius ``r``.  Each probe uses
    a child stream numbered by probe order.
    """
    rng = rng or RngStream(0)
    rmax = 1.0 / spec.a[0]
    lo, hi = r_range or (1e-6 * rmax, rmax * (1.0 - 1e-9))
    if not 0 < lo < hi < rmax:
        raise ValueError("radius range must satisfy 0 < lo < hi < a_1^-1")
    probes: list[tuple[float, PowerEstimate]] = []

    def beta_at(r: float) -> float:
        theta = solve_extremal(spec, r, strict=False).theta_bar
        est = estimate_beta_at(test_builder(r), spec, theta, samples, rng.child(len(probes)))
        probes.append((r, est))
        if on_probe is not None:
            on_probe(r, est)
        return est.probability

    target = budget.beta
    if beta_at(lo) <= target:
        return RadiusResult(0.0, (0.0, lo), "below-range", target, probes)
    if beta_at(hi) > target:
        return RadiusResult(None, (lo, hi), "no-bracket", target, probes, boundary=hi)
    while hi > lo * (1.0 + rtol):
        mid = math.sqrt(lo * hi)
        if beta_at(mid) <= target:
            hi = mid
        else:
            lo = mid
    return RadiusResult(math.sqrt(lo * hi), (lo, hi), "bracketed", target, probes)
