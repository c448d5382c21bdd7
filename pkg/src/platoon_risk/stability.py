"""Delay stability of the platoon and the delay-induced connectivity limit.

A mode with Laplacian eigenvalue ``lam`` is stable iff the dimensionless
pair ``(lam * tau, beta * tau)`` lies in the open region

    S = {(s1, s2) : 0 < s1 < pi/2, 0 < s2 < a / tan(a), a sin(a) = s1}.

Its curved boundary is traced by ``a -> (a sin a, a cot a)`` for
``a`` in ``(0, pi/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, OutOfDomain
from .graph import Spectrum

HALF_PI = 0.5 * math.pi
# distance to the boundary of S below which a mode counts as unstable
MARGIN_TOL = 1e-9
ROOT_TOL = 1e-12


def _bisect_increasing(func, target, lo, hi):
    """Root of ``func(x) = target`` for strictly increasing ``func`` on ``[lo, hi]``."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if func(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_a(s1: float) -> float:
    """Unique ``a`` in ``(0, pi/2)`` with ``a sin(a) = s1``."""
    if not 0.0 < s1 < HALF_PI:
        raise OutOfDomain(f"s1 must lie in (0, pi/2), got {s1}")
    a = _bisect_increasing(lambda x: x * math.sin(x), s1, 0.0, HALF_PI)
    if abs(a * math.sin(a) - s1) > ROOT_TOL:
        raise OutOfDomain(f"a sin(a) = {s1} not solvable to {ROOT_TOL}")
    return a


def _x_cot_x(x):
    if x == 0.0:
        return 1.0
    return x * math.cos(x) / math.sin(x)


def inverse_x_cot_x(s2: float) -> float:
    """Unique ``x`` in ``(0, pi/2)`` with ``x cot(x) = s2`` for ``s2`` in ``(0, 1)``."""
    if not 0.0 < s2 < 1.0:
        raise OutOfDomain(f"s2 must lie in (0, 1), got {s2}")
    # x cot x is decreasing, so bisect on its negative
    x = _bisect_increasing(lambda t: -_x_cot_x(t), -s2, 0.0, HALF_PI)
    if abs(_x_cot_x(x) - s2) > ROOT_TOL:
        raise OutOfDomain(f"x cot(x) = {s2} not solvable to {ROOT_TOL}")
    return x


def upper_boundary(s1: float) -> float:
    """Largest admissible ``s2`` for a given ``s1`` (the curve ``a / tan(a)``)."""
    a = solve_a(s1)
    return a / math.tan(a)


def theta(s2: float) -> float:
    """Largest admissible ``s1`` for a given ``s2``: ``g(f^{-1}(s2))`` with
    ``g(x) = x sin x`` and ``f(x) = x cot x``."""
    x = inverse_x_cot_x(s2)
    return x * math.sin(x)


def region_margin(s1: float, s2: float) -> float:
    """Distance of ``s2`` to ``{0, a/tan(a)}``; negative outside ``S``."""
    if not 0.0 < s1 < HALF_PI:
        return -math.inf
    top = upper_boundary(s1)
    return min(s2, top - s2)


def in_region_S(s1: float, s2: float) -> bool:
    if not (0.0 < s1 < HALF_PI and s2 > 0.0):
        return False
    top = upper_boundary(s1)
    # machine-level ties count as outside
    return s2 < top - 4 * np.finfo(float).eps * max(1.0, top)


@dataclass(frozen=True)
class ModeStatus:
    s1: float
    s2: float
    in_S: bool
    margin: float
    marginal: bool = False


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    per_mode: list[ModeStatus] = field(default_factory=list)

    @property
    def marginal_modes(self) -> list[int]:
        """Mode indices (1-based over i = 2..n) flagged as within MARGIN_TOL of the boundary."""
        return [i + 2 for i, m in enumerate(self.per_mode) if m.marginal]


def mode_pairs(s: Spectrum, beta: float, tau: float) -> np.ndarray:
    """Dimensionless pairs ``(lam_i tau, beta tau)`` for i = 2..n, shape ``(n-1, 2)``."""
    lam = np.asarray(s.eigenvalues[1:], dtype=float)
    return np.column_stack([lam * tau, np.full(lam.shape, beta * tau)])


def platoon_stable(s: Spectrum, beta: float, tau: float) -> StabilityVerdict:
    if not beta > 0:
        raise InvalidParameter(f"beta must be positive, got {beta}")
    if tau < 0:
        raise InvalidParameter(f"tau must be nonnegative, got {tau}")
    modes = []
    if tau == 0:
        # undelayed modes s^2 + lam s + lam beta are Hurwitz for lam, beta > 0
        for lam in s.eigenvalues[1:]:
            modes.append(ModeStatus(0.0, 0.0, True, math.inf))
        return StabilityVerdict(True, modes)
    for s1, s2 in mode_pairs(s, beta, tau):
        s1, s2 = float(s1), float(s2)
        inside = in_region_S(s1, s2)
        margin = region_margin(s1, s2)
        marginal = inside and margin <= MARGIN_TOL
        modes.append(ModeStatus(s1, s2, inside and not marginal, margin, marginal))
    return StabilityVerdict(all(m.in_S for m in modes), modes)


def resistance_lower_bound(n: int, beta: float, tau: float) -> float:
    """Delay-induced floor ``n (n-1) tau / theta(beta tau)`` on the effective resistance."""
    bt = beta * tau
    if not tau > 0 or not 0.0 < bt < 1.0:
        raise OutOfDomain(f"the resistance floor needs tau > 0 and beta*tau in (0, 1), got tau={tau}, beta*tau={bt}")
    return n * (n - 1) * tau / theta(bt)


def region_boundary_samples(m: int) -> list[tuple[float, float]]:
    """``m`` points ``(a sin a, a cot a)`` on the curved boundary of S, ``a`` uniform on ``[0, pi/2]``.

    The two endpoints are the limits ``(0, 1)`` and ``(pi/2, 0)``.
    """
    if m < 2:
        raise InvalidParameter("need at least 2 boundary samples")
    pts = []
    for a in np.linspace(0.0, HALF_PI, m):
        a = float(a)
        if a == 0.0:
            pts.append((0.0, 1.0))
        elif a == HALF_PI:
            pts.append((HALF_PI, 0.0))
        else:
            pts.append((a * math.sin(a), a / math.tan(a)))
    return pts
