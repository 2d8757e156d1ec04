"""The extremal problem behind the Ingster filters.

Minimize ``(1 / 2 eps^4) sum b_j^4 theta_j^4`` over ``sum a_j^2 theta_j^2 <= 1``
and ``||theta|| >= r``.  In ``x_j = theta_j^2`` this is a convex QP whose KKT
conditions give ``x_j = z0^2 b_j^-4 (1 - A a_j^2)_+``.  ``A`` is the ratio of
the two Lagrange multipliers and solves ``r^2 = A J1(A) / J2(A)``; ``z0^2``
then follows from the ellipsoid constraint ``1 = z0^2 J2 / A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ProblemSpec, Signal

__all__ = [
    "ExtremalSolution",
    "InfeasibleRadius",
    "TruncationTooSmall",
    "solve_extremal",
    "u_of_r",
    "ingster_filters",
    "critical_radius",
    "radius_for_dimension",
]

BISECTION_RTOL = 1e-12
BISECTION_MAXITER = 200
CONSTRAINT_RTOL = 1e-10


class InfeasibleRadius(ValueError):
    """Raised when ``r^2 >= a_1^-2``: the alternative is empty."""


class TruncationTooSmall(ValueError):
    """The solution activates coordinate ``N``, so the truncation binds."""


@dataclass(frozen=True, eq=False)
class ExtremalSolution:
    radius: float
    eps: float
    lagrange_A: float
    z0_sq: float
    efficient_dim: int
    theta_bar: Signal
    u_eps: float
    omega0: float
    J0: float
    J1: float
    J2: float
    energy_residual: float
    ellipsoid_residual: float
    filters: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ellipsoid_active: bool = True
    truncation_binding: bool = False
    iterations: int = 0

    @property
    def theta_bar_sq(self) -> np.ndarray:
        return self.theta_bar.coefficients**2

    def to_dict(self, include_theta: bool = True) -> dict:
        out = {
            "radius": self.radius,
            "eps": self.eps,
            "lagrange_A": self.lagrange_A,
            "z0_sq": self.z0_sq,
            "efficient_dim": self.efficient_dim,
            "u_eps": self.u_eps,
            "omega0": self.omega0,
            "J0": self.J0,
            "J1": self.J1,
            "J2": self.J2,
            "energy_residual": self.energy_residual,
            "ellipsoid_residual": self.ellipsoid_residual,
            "ellipsoid_active": self.ellipsoid_active,
            "truncation_binding": self.truncation_binding,
            "iterations": self.iterations,
        }
        if include_theta:
            out["theta_bar"] = self.theta_bar.coefficients.tolist()
        return out


def _weights(a2: np.ndarray, A: float) -> np.ndarray:
    # (1 - A a_j^2)_+ with exact comparison; a_j^2 == 1/A gives weight 0
    p = 1.0 - A * a2
    p[p <= 0.0] = 0.0
    return p


def _ratio(w: np.ndarray, a2: np.ndarray, A: float) -> float:
    # A J1 / J2 = sum w p / sum a^2 w p, i.e. 1 / (weighted mean of a^2)
    p = _weights(a2, A)
    wp = w * p
    return float(wp.sum() / (a2 * wp).sum())


def solve_extremal(spec: ProblemSpec, r: float, strict: bool | None = None) -> ExtremalSolution:
    """Solve the extremal problem at radius ``r`` on the truncated index set.

    ``strict`` (default: True unless the regularity sequence is explicit)
    raises :class:`TruncationTooSmall` when coordinate ``N`` is active, since
    the infinite problem would then put mass beyond ``N``.
    """
    if strict is None:
        strict = not spec.is_finite
    if not r > 0:
        raise ValueError("radius must be > 0; use u_of_r for r = 0")
    if spec.noise <= 0:
        raise ValueError("extremal value needs eps > 0")
    a2 = spec.a**2
    w = spec.b**-4.0
    r2 = r * r
    hi = 1.0 / a2[0]
    if r2 >= hi:
        raise InfeasibleRadius(f"empty alternative: r^2 = {r2:.6g} >= a_1^-2 = {hi:.6g}")

    iterations = 0
    g0 = _ratio(w, a2, 0.0)
    if r2 <= g0:
        # only the energy constraint binds: x_j proportional to b_j^-4
        A = 0.0
        ellipsoid_active = r2 == g0
    else:
        ellipsoid_active = True
        lo = 0.0
        while iterations < BISECTION_MAXITER:
            iterations += 1
            mid = 0.5 * (lo + hi)
            if _ratio(w, a2, mid) < r2:
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECTION_RTOL * hi:
                break
        # the upper end has g(A) >= r^2, so theta_bar lands inside Theta_a(r)
        A = hi

    p = _weights(a2, A)
    wp = w * p
    J1 = float(wp.sum())
    J0 = float((wp * p).sum())
    if A > 0:
        J2 = A * float((a2 * wp).sum())
        z0_sq = A / J2
    else:
        J2 = 0.0
        z0_sq = r2 / J1
    x = z0_sq * wp
    theta = np.sqrt(x)

    m = int(np.count_nonzero(A * a2 <= 1.0))
    binding = bool(p[-1] > 0)
    if strict and binding:
        raise TruncationTooSmall(
            f"truncation too small: coordinate N={spec.truncation} is active at r={r:.6g}; increase N"
        )

    energy = float(x.sum())
    ellipsoid = float((a2 * x).sum())
    energy_res = abs(energy - r2) / r2
    ellipsoid_res = abs(ellipsoid - 1.0) if ellipsoid_active else max(0.0, ellipsoid - 1.0)

    eps = spec.noise
    u = (z0_sq * math.sqrt(J0 / 2.0)) / eps**2
    bx = spec.b**2 * x
    omega = bx / math.sqrt(2.0 * float((bx * bx).sum()))
    omega.setflags(write=False)
    return ExtremalSolution(
        radius=float(r),
        eps=eps,
        lagrange_A=A,
        z0_sq=z0_sq,
        efficient_dim=m,
        theta_bar=Signal(theta),
        u_eps=u,
        omega0=float(omega.max()),
        filters=omega,
        J0=J0,
        J1=J1,
        J2=J2,
        energy_residual=energy_res,
        ellipsoid_residual=ellipsoid_res,
        ellipsoid_active=ellipsoid_active,
        truncation_binding=binding,
        iterations=iterations,
    )


def u_of_r(spec: ProblemSpec, r: float, strict: bool | None = None) -> float:
    """``u_eps(r)``; zero at ``r = 0`` where the zero signal is in the closure."""
    if r == 0:
        return 0.0
    return solve_extremal(spec, r, strict=strict).u_eps


def ingster_filters(sol: ExtremalSolution) -> np.ndarray:
    """``omega_j = b_j^2 theta_j^2 / sqrt(2 sum b_k^4 theta_k^4)``, normalized to ``sum omega^2 = 1/2``."""
    if not np.any(sol.theta_bar_sq > 0):
        raise ValueError("extremal signal is identically zero")
    return np.array(sol.filters)


def critical_radius(spec: ProblemSpec, level: float, rtol: float = 1e-10, strict: bool | None = None) -> float:
    """Radius ``r`` with ``u_eps(r) = level`` (``u`` is increasing in ``r``)."""
    if level <= 0:
        raise ValueError("level must be > 0")
    rmax = 1.0 / spec.a[0]
    hi = rmax * (1 - 1e-12)
    if u_of_r(spec, hi, strict=False) < level:
        raise InfeasibleRadius(f"u stays below {level} over the feasible radii")
    # halve until u drops below the level, then bisect on the last bracket
    lo = 0.5 * hi
    while u_of_r(spec, lo, strict=False) >= level:
        hi, lo = lo, 0.5 * lo
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if u_of_r(spec, mid, strict=False) < level:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    solve_extremal(spec, r, strict=strict)  # surface truncation problems
    return r


def radius_for_dimension(spec: ProblemSpec, m: int, margin: float = 1e-3) -> float:
    """A radius whose extremal solution has efficient dimension exactly ``m``.

    Takes ``A = (1 - margin) / a_m^2`` and returns ``r = sqrt(A J1 / J2)``;
    requires ``a_m < a_{m+1}`` so that coordinate ``m + 1`` is inactive.
    Dimension 1 would need ``r = a_1^-1``, where the alternative is empty.
    """
    if not 2 <= m < spec.truncation:
        raise ValueError(f"dimension {m} outside [2, {spec.truncation - 1}]")
    a2 = spec.a**2
    if not a2[m] * (1.0 - margin) > a2[m - 1]:
        raise ValueError("margin too large for the gap a_m < a_{m+1}")
    A = (1.0 - margin) / a2[m - 1]
    return math.sqrt(_ratio(spec.b**-4.0, a2, A))
