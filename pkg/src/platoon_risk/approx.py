"""Rational surrogate of the variance kernel on a compact window inside S.

For fixed ``s2`` the kernel ``f(., s2)`` blows up at ``s1 -> 0`` like
``1/s1^2`` and at the right edge of S, ``p = theta(s2)``, like ``1/(s1-p)``.
It is projected onto

    span{1, s, 1/s, s^2, 1/s^2, s^3, 1/(s - p), s^4}

in ``L^2(0.1, p - 0.05)``, rewritten over the common denominator
``s^2 (s - p)`` with numerator ``sum_k alpha_k s^k``, truncated to degree 4
and split as ``A(s)/s^2 + B(s)/(s - p)``.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from functools import cache
from pathlib import Path

import numpy as np

from .errors import IllConditionedBasis, InvalidParameter, OutOfDomain, OutsideWindow
from .graph import Spectrum
from .stability import inverse_x_cot_x
from .variance import MarginalDeviations, f_value

S2_MIN, S2_MAX = 0.1, 0.9
S1_MIN = 0.1
EDGE_GAP = 0.05
KEEP_DEGREE = 4
N_GAUSS = 64
# relative norm left after re-orthogonalisation below which the basis is rank deficient
RANK_TOL = 1e-13

_P = np.polynomial.polynomial
_XG, _WG = np.polynomial.legendre.leggauss(N_GAUSS)


def s_star(s2: float) -> float:
    """Root of ``s cot s = s2`` in ``(0, pi/2)``."""
    if not S2_MIN <= s2 <= S2_MAX:
        raise OutOfDomain(f"s2 must lie in [{S2_MIN}, {S2_MAX}], got {s2}")
    return inverse_x_cot_x(s2)


def pole(s2: float) -> float:
    """Right edge of S at height ``s2``: ``s* sin s*``."""
    x = s_star(s2)
    return x * math.sin(x)


def window(s2: float) -> tuple[float, float]:
    """Fit interval ``[0.1, pole(s2) - 0.05]`` in ``s1``."""
    return S1_MIN, pole(s2) - EDGE_GAP


def basis(s, p):
    """Basis functions evaluated at ``s``, shape ``(len(s), 8)``."""
    s = np.asarray(s, dtype=float)
    return np.stack([np.ones_like(s), s, 1 / s, s**2, 1 / s**2, s**3, 1 / (s - p), s**4], axis=-1)


def _numerator_map(p):
    """``M[k]`` = coefficients of basis element ``k`` times ``s^2 (s - p)``."""
    lin = np.array([-p, 1.0])
    rows = [
        _P.polymul([0, 0, 1], lin),
        _P.polymul([0, 0, 0, 1], lin),
        _P.polymul([0, 1], lin),
        _P.polymul([0, 0, 0, 0, 1], lin),
        lin,
        _P.polymul([0, 0, 0, 0, 0, 1], lin),
        np.array([0, 0, 1.0]),
        _P.polymul([0, 0, 0, 0, 0, 0, 1], lin),
    ]
    M = np.zeros((8, 8))
    for k, r in enumerate(rows):
        M[k, : len(r)] = r
    return M


def orthonormalize(values, weights):
    """Modified Gram-Schmidt with one re-orthogonalisation pass.

    ``values[:, k]`` holds basis function ``k`` at the quadrature nodes.
    Returns ``(Psi, C)`` with ``Psi = values @ C.T`` orthonormal under
    ``<u, v> = sum(weights * u * v)``.
    """
    m = values.shape[1]
    Psi = np.array(values, dtype=float)
    C = np.eye(m)
    for k in range(m):
        norm0 = math.sqrt(np.sum(weights * Psi[:, k] ** 2))
        for _ in range(2):
            for j in range(k):
                r = np.sum(weights * Psi[:, j] * Psi[:, k])
                Psi[:, k] -= r * Psi[:, j]
                C[k] -= r * C[j]
        norm = math.sqrt(np.sum(weights * Psi[:, k] ** 2))
        if norm <= RANK_TOL * norm0:
            raise IllConditionedBasis(f"basis element {k} lost rank during orthogonalisation")
        Psi[:, k] /= norm
        C[k] /= norm
    return Psi, C


@dataclass(frozen=True)
class RationalFit:
    """Fit of ``f(., s2)`` on ``[0.1, pole - 0.05]``.

    ``alpha`` holds all 8 numerator coefficients; evaluation uses the
    degree-4 truncation through ``a_coeffs`` (6) and ``b_coeffs`` (5).
    """

    s2: float
    s_star: float
    pole: float
    alpha: np.ndarray
    a_coeffs: np.ndarray
    b_coeffs: np.ndarray
    gram: np.ndarray
    residual_projection: np.ndarray

    @property
    def window(self) -> tuple[float, float]:
        return S1_MIN, self.pole - EDGE_GAP

    def __call__(self, s1):
        s1 = np.asarray(s1, dtype=float)
        return _P.polyval(s1, self.a_coeffs) / s1**2 + _P.polyval(s1, self.b_coeffs) / (s1 - self.pole)

    def pre_split(self, s1, full: bool = False):
        """``q(s1) / (s1^2 (s1 - pole))`` with the truncated (or full) numerator."""
        s1 = np.asarray(s1, dtype=float)
        al = self.alpha if full else truncate(self.alpha)
        return _P.polyval(s1, al) / (s1**2 * (s1 - self.pole))


def truncate(alpha):
    out = np.array(alpha, dtype=float)
    out[KEEP_DEGREE + 1 :] = 0.0
    return out


def split(alpha, p):
    """``A, B`` with ``A/s^2 + B/(s-p) = q/(s^2 (s-p))`` for the truncated numerator ``q``."""
    q = truncate(alpha)[: KEEP_DEGREE + 1]
    A = -_P.polymul(q, [p, 1.0]) / p**2
    B = q / p**2
    return A, B


def fit_rational(s2: float) -> RationalFit:
    """Least-squares rational fit of the exact kernel at height ``s2``."""
    x_star = s_star(s2)
    p = x_star * math.sin(x_star)
    lo, hi = S1_MIN, p - EDGE_GAP
    x = 0.5 * (hi - lo) * _XG + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * _WG
    T = basis(x, p)
    Psi, C = orthonormalize(T, w)
    fx = np.array([f_value(float(xi), s2) for xi in x])
    coef = Psi.T @ (w * fx)
    resid = fx - Psi @ coef
    alpha = (coef @ C) @ _numerator_map(p)
    A, B = split(alpha, p)
    gram = Psi.T @ (w[:, None] * Psi)
    return RationalFit(
        s2=float(s2),
        s_star=x_star,
        pole=p,
        alpha=alpha,
        a_coeffs=A,
        b_coeffs=B,
        gram=gram,
        residual_projection=Psi.T @ (w * resid),
    )


# -- interpolated surrogate ---------------------------------------------------------


def s2_grid() -> np.ndarray:
    """Fit heights: step 0.01 on ``[0.1, 0.85]``, 0.0025 on ``[0.85, 0.9]``."""
    coarse = np.round(np.arange(0.10, 0.85 - 1e-9, 0.01), 10)
    fine = np.round(np.arange(0.85, 0.90 + 1e-9, 0.0025), 10)
    return np.concatenate([coarse, fine])


_fit_lock = threading.Lock()
_fits: dict[float, RationalFit] = {}


def grid_fit(s2: float) -> RationalFit:
    """Fit at a grid height, computed once and shared."""
    key = round(float(s2), 10)
    fit = _fits.get(key)
    if fit is None:
        fit = fit_rational(key)
        with _fit_lock:
            fit = _fits.setdefault(key, fit)
    return fit


def in_window(s1: float, s2: float) -> bool:
    if not S2_MIN <= s2 <= S2_MAX:
        return False
    lo, hi = window(s2)
    return lo <= s1 <= hi


def _bracket(s2):
    grid = s2_grid()
    k = int(np.searchsorted(grid, s2, side="right")) - 1
    k = min(max(k, 0), grid.size - 2)
    g0, g1 = float(grid[k]), float(grid[k + 1])
    return g0, g1, (s2 - g0) / (g1 - g0)


def f_tilde(s1: float, s2: float) -> float:
    """Surrogate kernel on the window.

    The kernel grows like ``1/s2`` as ``s2 -> 0``, so ``s2 * alpha`` rather
    than ``alpha`` is interpolated linearly between grid fits; the pole is
    evaluated exactly at ``s2``.
    """
    s1, s2 = float(s1), float(s2)
    if not in_window(s1, s2):
        raise OutsideWindow(f"({s1}, {s2}) lies outside the fit window")
    g0, g1, t = _bracket(s2)
    alpha = ((1 - t) * g0 * grid_fit(g0).alpha + t * g1 * grid_fit(g1).alpha) / s2
    A, B = split(alpha, pole(s2))
    return float(_P.polyval(s1, A) / s1**2 + _P.polyval(s1, B) / (s1 - pole(s2)))


def sigma_tilde(s: Spectrum, g: float, tau: float, beta: float) -> MarginalDeviations:
    """Marginal deviations with the surrogate kernel in place of the quadrature."""
    if not tau > 0 or not beta > 0:
        raise InvalidParameter("tau and beta must be positive")
    lam = np.asarray(s.eigenvalues[1:], dtype=float)
    s2 = beta * tau
    bad = [j + 2 for j, l in enumerate(lam) if not in_window(float(l * tau), s2)]
    if bad:
        raise OutsideWindow(f"modes {bad} lie outside the fit window", modes=bad)
    uniq, inverse = np.unique(np.round(lam * tau, 12), return_inverse=True)
    fvals = np.array([f_tilde(float(x), s2) for x in uniq])[inverse.ravel()]
    w = s.pair_weights()[:, 1:]
    var = g * g * tau**3 / (2 * math.pi) * (w @ fvals)
    return MarginalDeviations(np.sqrt(var), g, tau, beta)


@cache
def averaged_alphas() -> np.ndarray:
    """Numerator coefficients averaged over ``s2`` in ``[0.1, 0.9]`` at step 0.01."""
    heights = np.round(np.arange(0.10, 0.90 + 1e-9, 0.01), 10)
    return np.mean([grid_fit(float(h)).alpha for h in heights], axis=0)


# -- error scan ------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorScan:
    s1: np.ndarray
    s2: np.ndarray
    f_exact: np.ndarray
    f_tilde: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        return np.abs(1.0 - self.f_tilde / self.f_exact)

    @property
    def max_eta(self) -> float:
        return float(self.eta.max())

    def to_csv(self, path: str | Path, digits: int = 10) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["s1", "s2", "f_exact", "f_tilde", "eta"])
            for row in zip(self.s1.ravel(), self.s2.ravel(), self.f_exact.ravel(), self.f_tilde.ravel(), self.eta.ravel()):
                out.writerow([f"{v:.{digits}g}" for v in row])


def error_scan(m1: int = 100, m2: int = 80) -> ErrorScan:
    """Relative error of the surrogate on ``m1`` s1-points times ``m2`` s2-points of the window."""
    if m1 < 10 or m2 < 10:
        raise InvalidParameter("error scan needs at least a 10x10 grid")
    s2s = np.linspace(S2_MIN, S2_MAX, m2)
    S1 = np.empty((m2, m1))
    S2 = np.repeat(s2s[:, None], m1, axis=1)
    FE = np.empty((m2, m1))
    FT = np.empty((m2, m1))
    for r, s2 in enumerate(s2s):
        lo, hi = window(float(s2))
        S1[r] = np.linspace(lo, hi, m1)
        for c, s1 in enumerate(S1[r]):
            FE[r, c] = f_value(float(s1), float(s2))
            FT[r, c] = f_tilde(float(s1), float(s2))
    return ErrorScan(S1, S2, FE, FT)
