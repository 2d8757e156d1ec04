"""Problem instances and simulation for the Gaussian sequence model.

Observations follow ``Y_j = b_j * theta_j + eps * xi_j`` for ``j = 1..N`` with
``xi_j`` i.i.d. standard normal.  The regularity sequence ``a`` defines the
ellipsoid ``sum a_j^2 theta_j^2 <= 1`` and the operator sequence ``b`` carries
the ill-posedness.  All index sets are truncated at a finite dimension ``N``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "FamilyKind",
    "SequenceFamily",
    "ProblemSpec",
    "Signal",
    "SignalClass",
    "RngStream",
    "GENERATOR_NAME",
    "generator_identity",
    "sequence_value",
    "simulate",
    "class_contains",
    "default_truncation",
    "make_spec",
    "MAX_TRUNCATION",
]

MAX_TRUNCATION = 10**6
GENERATOR_NAME = "numpy.random.PCG64"
MEMBERSHIP_ULPS = 8


class FamilyKind(str, enum.Enum):
    DIRECT = "direct"
    POLYNOMIAL_DECAY = "polynomial-decay"
    EXPONENTIAL_DECAY = "exponential-decay"
    POLYNOMIAL_GROWTH = "polynomial-growth"
    EXPONENTIAL_GROWTH = "exponential-growth"
    EXPLICIT = "explicit"


_PARAMETRIC = {
    FamilyKind.POLYNOMIAL_DECAY,
    FamilyKind.EXPONENTIAL_DECAY,
    FamilyKind.POLYNOMIAL_GROWTH,
    FamilyKind.EXPONENTIAL_GROWTH,
}


@dataclass(frozen=True)
class SequenceFamily:
    """A positive sequence indexed from 1, with proportionality constant 1.

    ``parameter`` is the exponent ``s`` or ``t``; it is ignored for the direct
    and explicit kinds.  Explicit families carry their values and have a
    finite length.
    """

    kind: FamilyKind
    parameter: float = 0.0
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in _PARAMETRIC:
            if not (self.parameter > 0 and math.isfinite(self.parameter)):
                raise ValueError(f"{kind.value} family needs a positive parameter, got {self.parameter}")
        if kind is FamilyKind.EXPLICIT:
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValueError("explicit family needs at least one value")
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ValueError("explicit family values must be positive and finite")
            object.__setattr__(self, "values", vals)

    # constructors
    @classmethod
    def direct(cls) -> "SequenceFamily":
        return cls(FamilyKind.DIRECT)

    @classmethod
    def polynomial_decay(cls, t: float) -> "SequenceFamily":
        return cls(FamilyKind.POLYNOMIAL_DECAY, t)

    @classmethod
    def exponential_decay(cls, t: float) -> "SequenceFamily":
        return cls(FamilyKind.EXPONENTIAL_DECAY, t)

    @classmethod
    def polynomial_growth(cls, s: float) -> "SequenceFamily":
        return cls(FamilyKind.POLYNOMIAL_GROWTH, s)

    @classmethod
    def exponential_growth(cls, s: float) -> "SequenceFamily":
        return cls(FamilyKind.EXPONENTIAL_GROWTH, s)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "SequenceFamily":
        return cls(FamilyKind.EXPLICIT, 0.0, tuple(values))

    @property
    def length(self) -> int | None:
        """Number of stored values, or None for an infinite family."""
        return len(self.values) if self.kind is FamilyKind.EXPLICIT else None

    def evaluate(self, n: int) -> np.ndarray:
        """Values at indices ``1..n`` as a float array."""
        if n < 1:
            raise ValueError("need n >= 1")
        if self.kind is FamilyKind.EXPLICIT:
            if n > len(self.values):
                raise IndexError(f"explicit family has {len(self.values)} values, asked for {n}")
            return np.asarray(self.values[:n], dtype=float)
        j = np.arange(1, n + 1, dtype=float)
        p = self.parameter
        if self.kind is FamilyKind.DIRECT:
            return np.ones(n)
        if self.kind is FamilyKind.POLYNOMIAL_DECAY:
            return j ** (-p)
        if self.kind is FamilyKind.EXPONENTIAL_DECAY:
            return np.exp(-p * j)
        if self.kind is FamilyKind.POLYNOMIAL_GROWTH:
            return j**p
        return np.exp(p * j)

    def to_record(self, prefix: str) -> dict:
        rec = {f"{prefix}_kind": self.kind.value, f"{prefix}_parameter": self.parameter}
        if self.kind is FamilyKind.EXPLICIT:
            rec[f"{prefix}_values"] = list(self.values)
        return rec

    @classmethod
    def from_record(cls, rec: dict, prefix: str) -> "SequenceFamily":
        kind = FamilyKind(rec[f"{prefix}_kind"])
        if kind is FamilyKind.EXPLICIT:
            return cls.explicit(rec[f"{prefix}_values"])
        return cls(kind, float(rec.get(f"{prefix}_parameter", 0.0)))


def sequence_value(family: SequenceFamily, j: int) -> float:
    """Value of the family at a single index ``j >= 1``."""
    if j < 1:
        raise ValueError(f"index must be >= 1, got {j}")
    if family.kind is FamilyKind.EXPLICIT and j > len(family.values):
        raise IndexError(f"index {j} out of range for explicit family of length {len(family.values)}")
    return float(family.evaluate(j)[j - 1])


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """The (regularity, operator) pair with noise level and truncation.

    ``smoothness`` gives ``a_j``, ``operator`` gives ``b_j``.  The noise level
    may be zero to express the noiseless limit; everything that divides by
    ``eps`` rejects that case itself.
    """

    smoothness: SequenceFamily
    operator: SequenceFamily
    noise: float
    truncation: int

    def __post_init__(self) -> None:
        if not (self.noise >= 0 and math.isfinite(self.noise)):
            raise ValueError(f"noise level must be finite and >= 0, got {self.noise}")
        n = int(self.truncation)
        if n < 2:
            raise ValueError(f"truncation must be >= 2, got {self.truncation}")
        if n > MAX_TRUNCATION:
            raise ValueError(f"truncation above the cap {MAX_TRUNCATION}")
        object.__setattr__(self, "truncation", n)
        for fam in (self.smoothness, self.operator):
            if fam.length is not None and fam.length < n:
                raise ValueError(f"explicit family shorter than truncation {n}")
        a = self.a
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(self.b)) or np.any(self.b <= 0):
            raise ValueError("sequences must be positive and finite over 1..N")
        if np.any(np.diff(a) < 0):
            raise ValueError("regularity sequence a must be non-decreasing")
        if not math.isfinite(float(self.b_inv4_cumsum[-1])):
            raise ValueError(f"sum of b_j^-4 overflows at truncation {n}; reduce N")

    @property
    def eps(self) -> float:
        return self.noise

    @property
    def N(self) -> int:
        return self.truncation

    @cached_property
    def a(self) -> np.ndarray:
        v = self.smoothness.evaluate(self.truncation)
        v.setflags(write=False)
        return v

    @cached_property
    def b(self) -> np.ndarray:
        v = self.operator.evaluate(self.truncation)
        v.setflags(write=False)
        return v

    @cached_property
    def b_inv4_cumsum(self) -> np.ndarray:
        """Prefix sums ``sum_{j<=D} b_j^-4`` for ``D = 1..N`` (index ``D-1``)."""
        with np.errstate(over="ignore"):
            v = np.cumsum(self.b**-4.0)
        v.setflags(write=False)
        return v

    @property
    def is_finite(self) -> bool:
        """True when the regularity sequence is explicit, i.e. the index set really is 1..N."""
        return self.smoothness.kind is FamilyKind.EXPLICIT

    def with_noise(self, eps: float) -> "ProblemSpec":
        return ProblemSpec(self.smoothness, self.operator, eps, self.truncation)

    def with_truncation(self, n: int) -> "ProblemSpec":
        return ProblemSpec(self.smoothness, self.operator, self.noise, n)

    def to_record(self) -> dict:
        rec = {}
        rec.update(self.smoothness.to_record("a"))
        rec.update(self.operator.to_record("b"))
        rec["eps"] = self.noise
        rec["N"] = self.truncation
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ProblemSpec":
        return cls(
            SequenceFamily.from_record(rec, "a"),
            SequenceFamily.from_record(rec, "b"),
            float(rec["eps"]),
            int(rec["N"]),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return self.to_record() == other.to_record()

    def __hash__(self) -> int:
        return hash((self.smoothness, self.operator, self.noise, self.truncation))


@dataclass(frozen=True, eq=False)
class Signal:
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1:
            raise ValueError("signal must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise ValueError("signal entries must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def __len__(self) -> int:
        return len(self.coefficients)

    @property
    def norm_sq(self) -> float:
        return float(np.dot(self.coefficients, self.coefficients))

    @classmethod
    def zeros(cls, n: int) -> "Signal":
        return cls(np.zeros(n))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Signal):
            return NotImplemented
        return np.array_equal(self.coefficients, other.coefficients)

    def __hash__(self) -> int:
        return hash(self.coefficients.tobytes())


@dataclass(frozen=True)
class SignalClass:
    """The alternative ``Theta_a(r)``: ellipsoid members with ``||theta|| >= r``."""

    spec: ProblemSpec
    radius: float

    def __post_init__(self) -> None:
        if not self.radius >= 0:
            raise ValueError("radius must be >= 0")

    @property
    def nonempty(self) -> bool:
        return self.radius**2 <= self.spec.a[0] ** -2


def class_contains(cls: SignalClass, signal: Signal) -> bool:
    """Membership in ``Theta_a(r)``.

    Both sums are compared with a slack of ``MEMBERSHIP_ULPS`` machine epsilons
    so that signals built exactly on a boundary (for instance with
    ``theta_j = 1/sqrt(3)``) are not rejected because of input rounding.
    """
    theta = signal.coefficients
    if len(theta) != cls.spec.truncation:
        raise ValueError(f"signal length {len(theta)} != truncation {cls.spec.truncation}")
    tol = MEMBERSHIP_ULPS * np.finfo(float).eps
    ellipsoid = math.fsum(cls.spec.a**2 * theta**2)
    energy = math.fsum(theta * theta)
    return ellipsoid <= 1.0 + tol and energy >= cls.radius**2 * (1.0 - tol)


def generator_identity() -> str:
    return f"{GENERATOR_NAME} (numpy {np.__version__})"


@dataclass(frozen=True)
class RngStream:
    """Seed plus stream id; every call to :meth:`generator` restarts the stream.

    Streams are derived with ``SeedSequence(seed, spawn_key=(stream, *sub))``,
    so distinct ids give independent streams.
    """

    seed: int
    stream: int = 0
    sub: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream < 0 or any(k < 0 for k in self.sub):
            raise ValueError("stream ids must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *self.sub))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream, (*self.sub, int(k)))


def simulate(spec: ProblemSpec, signal: Signal, rng: RngStream | np.random.Generator) -> np.ndarray:
    """One draw of ``Y_1..Y_N``; normal draws are consumed in index order."""
    theta = signal.coefficients
    if len(theta) != spec.truncation:
        raise ValueError(f"signal length {len(theta)} != truncation {spec.truncation}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    xi = gen.standard_normal(spec.truncation)
    return spec.b * theta + spec.noise * xi


def default_truncation(smoothness: SequenceFamily, radius: float, factor: float = 1e-3) -> int:
    """Smallest ``N >= 2`` with ``a_N^-2 <= factor * radius^2``, capped at MAX_TRUNCATION.

    The ellipsoid tail satisfies ``sum_{j>N} theta_j^2 <= a_N^-2`` which makes
    this the truncation-error budget.  Explicit families return their length.
    """
    if smoothness.length is not None:
        return smoothness.length
    if radius <= 0:
        return MAX_TRUNCATION
    target = factor * radius**2

    def ok(n: int) -> bool:
        return sequence_value(smoothness, n) ** -2 <= target

    hi = 2
    while not ok(hi):
        if hi >= MAX_TRUNCATION:
            return MAX_TRUNCATION
        hi = min(2 * hi, MAX_TRUNCATION)
    lo = max(2, hi // 2)
    if ok(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


FAMILIES = ("direct", "mild", "severe")


def make_spec(family: str, s: float, t: float, eps: float, truncation: int) -> ProblemSpec:
    """Standard instances: Sobolev-type ``a_j = j^s`` with

    * ``direct``: ``b_j = 1``
    * ``mild``: ``b_j = j^-t`` (``t = 0`` falls back to direct)
    * ``severe``: ``b_j = exp(-t j)``
    """
    a = SequenceFamily.polynomial_growth(s)
    if family == "direct":
        b = SequenceFamily.direct()
    elif family == "mild":
        b = SequenceFamily.polynomial_decay(t) if t > 0 else SequenceFamily.direct()
    elif family == "severe":
        b = SequenceFamily.exponential_decay(t)
    else:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return ProblemSpec(a, b, eps, truncation)
