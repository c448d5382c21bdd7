"""Steady-state variance of the inter-vehicle distances.

The per-mode variance is ``g^2 tau^3 / (2 pi) * f(lam tau, beta tau)`` with

    f(s1, s2) = int_R dr / ((s1 s2 - r^2 cos r)^2 + r^2 (s1 - r sin r)^2).

The integrand is even, oscillates with period 2 pi and decays like r^-4;
``f_kernel`` integrates ``[0, R]`` adaptively and adds a two-sided analytic
bound for the tail beyond ``R``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cache, lru_cache

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidParameter, OutsideStabilityRegion, UnstablePlatoon
from .graph import Spectrum
from .quadrature import integrate_panels
from .stability import MARGIN_TOL, in_region_S, platoon_stable, region_margin, theta, upper_boundary

PANEL_WIDTH = 0.25 * math.pi
KERNEL_RTOL = 1e-8
TAIL_RTOL = 1e-10
# any f on S exceeds this; only used to size the truncation radius up front
_F_FLOOR = 25.0


@dataclass(frozen=True)
class KernelEval:
    value: float
    est_error: float
    tail_bound: float


@dataclass(frozen=True)
class MarginalDeviations:
    sigma: np.ndarray
    g: float
    tau: float
    beta: float

    def __len__(self):
        return len(self.sigma)


def kernel_integrand(r, s1, s2):
    r2 = r * r
    re = s1 * s2 - r2 * np.cos(r)
    im = s1 - r * np.sin(r)
    return 1.0 / (re * re + r2 * im * im)


def _tail_interval(R, s1, s2):
    """Bounds on ``int_R^inf`` of the integrand from ``r^4 (1 -+ c/r)`` envelopes."""
    c_lo = 2 * s1 + 2 * s1 * s2 / R
    c_hi = 2 * s1 + (s1 * s1 + 2 * s1 * s2) / R + (s1 * s2) ** 2 / R**3
    upper = 1.0 / (3 * R**3 * (1 - c_lo / R))
    lower = 1.0 / (3 * R**3 * (1 + c_hi / R))
    return lower, upper


def _radius_for(s1, s2, target):
    R = 32 * PANEL_WIDTH
    while True:
        lo, hi = _tail_interval(R, s1, s2)
        if hi - lo <= target:
            return R
        R *= 1.25


@lru_cache(maxsize=1 << 16)
def _kernel_cached(s1: float, s2: float) -> KernelEval:
    func = lambda r: kernel_integrand(r, s1, s2)  # noqa: E731
    R = _radius_for(s1, s2, TAIL_RTOL * _F_FLOOR / 2)
    npan = int(math.ceil(R / PANEL_WIDTH))
    R = npan * PANEL_WIDTH
    core, qerr = integrate_panels(func, np.linspace(0.0, R, npan + 1), rtol=0.25 * KERNEL_RTOL)
    lo, hi = _tail_interval(R, s1, s2)
    value = 2.0 * (core + 0.5 * (lo + hi))
    tail = hi - lo
    while tail > TAIL_RTOL * value:
        # only reachable if f dips below _F_FLOOR; extend the radius
        R2 = _radius_for(s1, s2, 0.5 * TAIL_RTOL * value)
        n2 = int(math.ceil((R2 - R) / PANEL_WIDTH))
        extra, e2 = integrate_panels(func, np.linspace(R, R + n2 * PANEL_WIDTH, n2 + 1), rtol=0.25 * KERNEL_RTOL)
        core, qerr, R = core + extra, qerr + e2, R + n2 * PANEL_WIDTH
        lo, hi = _tail_interval(R, s1, s2)
        value = 2.0 * (core + 0.5 * (lo + hi))
        tail = hi - lo
    return KernelEval(value, 2.0 * qerr, tail)


def f_kernel(s1: float, s2: float) -> KernelEval:
    """Evaluate the variance kernel at a point of the stability region."""
    s1, s2 = float(s1), float(s2)
    if not in_region_S(s1, s2) or region_margin(s1, s2) < MARGIN_TOL:
        raise OutsideStabilityRegion(f"({s1}, {s2}) is not inside S with margin {MARGIN_TOL}")
    return _kernel_cached(round(s1, 12), round(s2, 12))


def f_value(s1: float, s2: float) -> float:
    return f_kernel(s1, s2).value


def pair_weights(s: Spectrum) -> np.ndarray:
    return s.pair_weights()


def sigma_vector(s: Spectrum, g: float, tau: float, beta: float, workers: int = 1) -> MarginalDeviations:
    """Steady-state standard deviations of ``x_{i+1} - x_i``, i = 1..n-1.

    ``tau = 0`` uses the undelayed closed form
    ``sigma_i^2 = g^2 / (2 beta) * sum_j w_ij / lam_j^2``.
    """
    if g == 0:
        raise InvalidParameter("noise diffusion g must be nonzero")
    verdict = platoon_stable(s, beta, tau)
    if not verdict.stable:
        bad = [i + 2 for i, m in enumerate(verdict.per_mode) if not m.in_S]
        raise UnstablePlatoon(f"modes {bad} lie outside the stability region")
    lam = np.asarray(s.eigenvalues[1:], dtype=float)
    w = s.pair_weights()[:, 1:]
    if tau == 0:
        var = g * g / (2 * beta) * (w @ (1.0 / lam**2))
        return MarginalDeviations(np.sqrt(var), g, tau, beta)
    s1 = lam * tau
    keys = np.round(s1, 12)
    uniq, inverse = np.unique(keys, return_inverse=True)
    evaluate = lambda x: f_value(float(x), beta * tau)  # noqa: E731
    if workers > 1 and uniq.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fu = np.array(list(pool.map(evaluate, uniq)))
    else:
        fu = np.array([evaluate(x) for x in uniq])
    fvals = fu[inverse.ravel()]
    var = g * g * tau**3 / (2 * math.pi) * (w @ fvals)
    return MarginalDeviations(np.sqrt(var), g, tau, beta)


# -- minimum of the kernel ----------------------------------------------------

GRID_S1 = np.round(np.arange(0.05, 1.55 + 1e-9, 0.025), 10)
GRID_S2_POINTS = 20


@cache
def kernel_grid():
    """Kernel on the search grid: s1 step 0.025, 20 interior s2 points per s1.

    Returns arrays ``(s1, s2, f)`` of equal shape ``(len(GRID_S1), 20)``.
    """
    rows1, rows2, rowsf = [], [], []
    frac = np.arange(1, GRID_S2_POINTS + 1) / (GRID_S2_POINTS + 1)
    for s1 in GRID_S1:
        top = upper_boundary(float(s1))
        s2s = top * frac
        rows1.append(np.full_like(s2s, s1))
        rows2.append(s2s)
        rowsf.append([f_value(float(s1), float(x)) for x in s2s])
    S1, S2, F = np.array(rows1), np.array(rows2), np.array(rowsf)
    for arr in (S1, S2, F):
        arr.setflags(write=False)
    return S1, S2, F


def minimize_on_S(objective, start, step=(0.0125, 0.01), xatol=1e-6):
    """Nelder-Mead refinement of ``objective(s1, s2)`` restricted to S."""

    def wrapped(p):
        s1, s2 = float(p[0]), float(p[1])
        if not in_region_S(s1, s2) or region_margin(s1, s2) < 1e-7:
            return math.inf
        return objective(s1, s2)

    x0 = np.asarray(start, dtype=float)
    simplex = np.array([x0, x0 + [step[0], 0.0], x0 + [0.0, step[1]]])
    res = minimize(
        wrapped,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": xatol, "fatol": 1e-12, "maxiter": 4000},
    )
    return float(res.fun), float(res.x[0]), float(res.x[1])


@cache
def f_min() -> tuple[float, float, float]:
    """Global minimum of the kernel over S and its minimiser ``(f_min, s1*, s2*)``."""
    S1, S2, F = kernel_grid()
    k = np.unravel_index(np.argmin(F), F.shape)
    start = (S1[k], S2[k])
    step2 = 0.5 * (S2[k[0], 1] - S2[k[0], 0])
    return minimize_on_S(f_value, start, step=(0.0125, step2))


def sigma_star(g: float, tau: float) -> float:
    """Delay-and-noise floor ``sqrt(f_min / pi) |g| tau^{3/2}`` shared by every sigma_i."""
    if tau < 0:
        raise InvalidParameter("tau must be nonnegative")
    if tau == 0:
        return 0.0
    return math.sqrt(f_min()[0] / math.pi) * abs(g) * tau**1.5


@cache
def _theta_grid():
    S1, S2, _ = kernel_grid()
    out = np.vectorize(theta, otypes=[float])(S2)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4096)
def f_min_m(n: int, m: int) -> float:
    """``min_j inf_S f(s1, s2) [(j-1)/s1 + (n-j)/theta(s2)]^(2/m)``.

    Inside S every ``s1 < theta(s2)``, so the bracket grows with ``j`` and
    the minimum over ``j`` is always attained at ``j = 2``.
    """
    if n < 2 or m < 1:
        raise InvalidParameter("need n >= 2 and m >= 1")
    p = 2.0 / m

    def objective(s1, s2):
        return f_value(s1, s2) * (1.0 / s1 + (n - 2) / theta(s2)) ** p

    S1, S2, F = kernel_grid()
    G = F * (1.0 / S1 + (n - 2) / _theta_grid()) ** p
    k = np.unravel_index(np.argmin(G), G.shape)
    step2 = 0.5 * (S2[k[0], 1] - S2[k[0], 0])
    return minimize_on_S(objective, (S1[k], S2[k]), step=(0.0125, step2))[0]
