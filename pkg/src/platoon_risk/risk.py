"""Value-at-risk of inter-vehicle collision and detachment.

For a steady-state distance ``y ~ N(d, sigma^2)`` the collision event family
is ``y < d / (delta + c)`` and the detachment family is
``y > a d - 1 / (delta + h)``.  The risk ``R_eps`` is the smallest ``delta``
whose event has probability below ``eps``; it is zero, a finite number or
infinite depending on where ``sigma`` sits relative to two thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import total_ordering
from statistics import NormalDist

import numpy as np

from .errors import InvalidParameter, InvalidSpec, InvalidSplit, OutOfDomain, SeriesDivergence
from .variance import MarginalDeviations, f_min, f_min_m, sigma_star

SQRT2 = math.sqrt(2.0)
SERIES_RTOL = 1e-12
SERIES_MAX_TERMS = 200

COLLISION = "collision"
DETACHMENT = "detachment"


# -- inverse error function ---------------------------------------------------


def _erf_prime(x):
    return 2.0 / math.sqrt(math.pi) * math.exp(-x * x)


def _inverse(fun, target, x0, lo, hi, tol=1e-15):
    """Safeguarded Newton for a strictly monotone ``fun`` bracketed by ``[lo, hi]``."""
    increasing = fun(hi) > fun(lo)
    x = min(max(x0, lo), hi)
    for _ in range(100):
        r = fun(x) - target
        if r == 0:
            return x
        if (r < 0) == increasing:
            lo = x
        else:
            hi = x
        slope = _erf_prime(x) * (1 if increasing else -1)
        step = r / slope if slope != 0 else math.inf
        xn = x - step
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def erfinv(y: float) -> float:
    """Inverse of ``math.erf`` on ``(-1, 1)``."""
    if not -1.0 < y < 1.0:
        raise OutOfDomain(f"erfinv needs y in (-1, 1), got {y}")
    if y == 0:
        return 0.0
    if y < 0:
        return -erfinv(-y)
    x0 = -NormalDist().inv_cdf(0.5 * (1.0 - y)) / SQRT2
    if y > 0.5:
        # the complement keeps digits that 1 - y would lose
        return _inverse(math.erfc, 1.0 - y, x0, 0.0, 27.0)
    return _inverse(math.erf, y, x0, 0.0, 27.0)


def kappa(eps: float) -> float:
    """``erfinv(1 - 2 eps)``, solved as ``erfc(kappa) = 2 eps`` for accuracy at small ``eps``."""
    if not 0.0 < eps < 0.5:
        raise OutOfDomain(f"eps must lie in (0, 0.5), got {eps}")
    x0 = -NormalDist().inv_cdf(eps) / SQRT2
    return _inverse(math.erfc, 2.0 * eps, x0, 0.0, 27.0)


# -- event specifications and risk values ---------------------------------------


@dataclass(frozen=True)
class EventSpec:
    """Collision ``(c, eps)`` or detachment ``(a, h, eps)`` family around spacing ``d``."""

    kind: str
    d: float
    eps: float
    c: float = 1.0
    a: float = 2.0
    h: float = 1.0

    def __post_init__(self):
        if self.kind not in (COLLISION, DETACHMENT):
            raise InvalidSpec(f"kind must be '{COLLISION}' or '{DETACHMENT}', got {self.kind!r}")
        if not self.d > 0:
            raise InvalidSpec(f"d must be positive, got {self.d}")
        if not 0.0 < self.eps < 1.0:
            raise InvalidSpec(f"eps must lie in (0, 1), got {self.eps}")
        if self.kind == COLLISION and not self.c >= 1:
            raise InvalidSpec(f"collision tolerance c must be >= 1, got {self.c}")
        if self.kind == DETACHMENT:
            if not self.a >= 1:
                raise InvalidSpec(f"range multiplier a must be >= 1, got {self.a}")
            if not self.h > 0:
                raise InvalidSpec(f"alarm sharpness h must be positive, got {self.h}")

    @classmethod
    def collision(cls, d: float, eps: float, c: float = 1.0) -> "EventSpec":
        return cls(COLLISION, d, eps, c=c)

    @classmethod
    def detachment(cls, d: float, eps: float, a: float = 2.0, h: float = 1.0) -> "EventSpec":
        return cls(DETACHMENT, d, eps, a=a, h=h)

    def with_eps(self, eps: float) -> "EventSpec":
        return replace(self, eps=eps)

    def contains(self, y, delta):
        """Indicator of ``y`` lying in the event set for index ``delta``."""
        y = np.asarray(y, dtype=float)
        if self.kind == COLLISION:
            return y < self.d / (delta + self.c)
        return y > self.a * self.d - 1.0 / (delta + self.h)


_RANK = {"zero": 0, "finite": 1, "inf": 2}


@total_ordering
@dataclass(frozen=True)
class RiskValue:
    """Tri-state risk ordered ``Zero < Finite(v) < Infinite``."""

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in _RANK:
            raise InvalidParameter(f"unknown risk kind {self.kind!r}")

    @classmethod
    def zero(cls) -> "RiskValue":
        return cls("zero", 0.0)

    @classmethod
    def infinite(cls) -> "RiskValue":
        return cls("inf", math.inf)

    @classmethod
    def finite(cls, v: float) -> "RiskValue":
        if math.isnan(v):
            raise InvalidParameter("risk value is NaN")
        if v <= 0:
            return cls.zero()
        if math.isinf(v):
            return cls.infinite()
        return cls("finite", float(v))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_infinite(self) -> bool:
        return self.kind == "inf"

    def __float__(self):
        return float(self.value)

    def _key(self):
        return (_RANK[self.kind], self.value if self.kind == "finite" else 0.0)

    def __lt__(self, other):
        if not isinstance(other, RiskValue):
            return NotImplemented
        return self._key() < other._key()

    def __eq__(self, other):
        if not isinstance(other, RiskValue):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def format(self, digits: int = 6) -> str:
        if self.is_zero:
            return "0"
        if self.is_infinite:
            return "inf"
        return f"{self.value:.{digits}g}"

    def __str__(self):
        return self.format()


# -- closed-form risks ----------------------------------------------------------


def collision_thresholds(spec: EventSpec) -> tuple[float, float]:
    """``(zero_below, infinite_from)`` levels of sigma for the collision family."""
    crit = spec.d / (kappa(spec.eps) * SQRT2)
    return crit * (spec.c - 1.0) / spec.c, crit


def detachment_thresholds(spec: EventSpec) -> tuple[float, float]:
    k2 = kappa(spec.eps) * SQRT2
    span = (spec.a - 1.0) * spec.d
    return (span - 1.0 / spec.h) / k2, span / k2


def collision_risk(sigma: float, spec: EventSpec) -> RiskValue:
    if sigma < 0:
        raise InvalidParameter("sigma must be nonnegative")
    if spec.kind != COLLISION:
        raise InvalidSpec("collision_risk needs a collision spec")
    if spec.eps >= 0.5:
        return RiskValue.zero()
    zero_at, inf_at = collision_thresholds(spec)
    # ties go to the larger risk
    if sigma >= inf_at:
        return RiskValue.infinite()
    if sigma <= zero_at:
        return RiskValue.zero()
    k = kappa(spec.eps)
    return RiskValue.finite(spec.d / (spec.d - k * sigma * SQRT2) - spec.c)


def detachment_risk(sigma: float, spec: EventSpec) -> RiskValue:
    """Detachment risk; with ``a = 1`` any positive sigma gives Infinite."""
    if sigma < 0:
        raise InvalidParameter("sigma must be nonnegative")
    if spec.kind != DETACHMENT:
        raise InvalidSpec("detachment_risk needs a detachment spec")
    if spec.eps >= 0.5:
        return RiskValue.zero()
    zero_at, inf_at = detachment_thresholds(spec)
    if sigma >= inf_at:
        return RiskValue.infinite()
    if sigma <= zero_at:
        return RiskValue.zero()
    k = kappa(spec.eps)
    return RiskValue.finite(1.0 / ((spec.a - 1.0) * spec.d - SQRT2 * k * sigma) - spec.h)


def risk(sigma: float, spec: EventSpec) -> RiskValue:
    if spec.kind == COLLISION:
        return collision_risk(sigma, spec)
    return detachment_risk(sigma, spec)


def risk_vector(md: MarginalDeviations, spec: EventSpec) -> list[RiskValue]:
    return [risk(float(s), spec) for s in md.sigma]


def joint_risk_boxes(md: MarginalDeviations, spec: EventSpec, split=None):
    """Coordinatewise boxes for the joint (all-pairs) risk vector.

    ``V[i] = (0, R_eps^i)`` bounds the intersection risk and
    ``W[i] = (R_eps^i, R_{eps_i}^i)`` the union risk, where ``eps_i`` is a
    positive split of ``eps`` (uniform by default).
    """
    m = len(md.sigma)
    if split is None:
        split = np.full(m, spec.eps / m)
    split = np.asarray(split, dtype=float)
    if split.shape != (m,):
        raise InvalidSplit(f"split needs {m} entries, got {split.size}")
    if np.any(split <= 0):
        raise InvalidSplit("split entries must be positive")
    if abs(split.sum() - spec.eps) > 1e-12:
        raise InvalidSplit(f"split sums to {split.sum():.15g}, expected eps = {spec.eps}")
    V, W = [], []
    for s, e in zip(md.sigma, split):
        r_all = risk(float(s), spec)
        r_one = risk(float(s), spec.with_eps(float(e)))
        V.append((RiskValue.zero(), r_all))
        W.append((r_all, r_one))
    return V, W


# -- fundamental limits ---------------------------------------------------------


def inevitability_constant() -> float:
    """``sqrt(2) sqrt(f_min / pi)``: collision risk is infinite for every
    platoon once ``|g| tau^{3/2} >= d / (constant * kappa)``."""
    return SQRT2 * math.sqrt(f_min()[0] / math.pi)


def collision_risk_lower_bound(g: float, tau: float, spec: EventSpec) -> RiskValue:
    """Best collision risk any stable platoon with noise ``g`` and delay ``tau`` can reach."""
    return collision_risk(sigma_star(g, tau), spec)


def e_lower(g: float, tau: float, spec: EventSpec) -> float:
    """Smallest attainable numerator ``((1 - c) + c x)^2``, ``x = sqrt(2) kappa sigma / d``,
    over ``sigma >= sigma_star``."""
    if spec.kind != COLLISION:
        raise InvalidSpec("the trade-off bound is stated for collision")
    k2 = SQRT2 * kappa(spec.eps) / spec.d
    c = spec.c
    s_opt = (c - 1.0) / c / k2
    s = max(s_opt, sigma_star(g, tau))
    return (1 - c) ** 2 + 2 * (1 - c) * c * k2 * s + (c * k2 * s) ** 2


def alpha_terms(n: int, g: float, tau: float, spec: EventSpec, max_terms: int = SERIES_MAX_TERMS):
    """Terms ``alpha_m`` of the trade-off series, summed in ascending ``m``.

    Stops once a term drops below ``1e-12`` of the partial sum.  Raises
    :class:`SeriesDivergence` if the terms are still growing at ``max_terms``.
    """
    y = abs(g) * tau**1.5 * kappa(spec.eps) / (spec.d * math.sqrt(math.pi))
    terms = []
    total = 0.0
    if y == 0:
        return terms
    log_y = math.log(y)
    for m in range(1, max_terms + 1):
        fm = f_min_m(n, m)
        log_t = 0.5 * m * math.log(2.0) + math.log(m + 1) + m * log_y + 0.5 * m * math.log(fm)
        if log_t > 700:
            raise SeriesDivergence(f"trade-off series term {m} overflows")
        t = math.exp(log_t)
        terms.append(t)
        total += t
        if t < SERIES_RTOL * total:
            return terms
    if terms[-1] >= terms[-2]:
        raise SeriesDivergence(
            "trade-off series terms still non-decreasing after "
            f"{max_terms} terms (sigma_star beyond d/(kappa sqrt 2))"
        )
    return terms


def tradeoff_bound(n: int, g: float, tau: float, beta: float, spec: EventSpec) -> float:
    """Lower bound on ``R_eps^{C,i} * sqrt(effective resistance)`` for every pair."""
    if int(n) != n or n < 2:
        raise InvalidParameter("n must be an integer >= 2")
    if not tau > 0:
        raise OutOfDomain("tau must be positive")
    if not 0.0 < beta * tau < 1.0:
        raise OutOfDomain(f"beta*tau must lie in (0, 1), got {beta * tau}")
    e = e_lower(g, tau, spec)
    series = sum(alpha_terms(int(n), g, tau, spec))
    return math.sqrt(n * tau * e * (2.0 * (n - 1) / math.pi + series))
