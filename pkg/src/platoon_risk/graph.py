"""Weighted communication graphs, Laplacians and their spectra.

The spectrum is the only graph information the risk formulas consume, so
it is computed once, with a reproducible eigenvector basis whose first
column is exactly the normalised all-ones vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DisconnectedGraph, InvalidParameter

# relative threshold below which lambda_2 counts as zero
CONNECTIVITY_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected simple graph stored as a dense symmetric weight matrix.

    Construction validates symmetry, a zero diagonal, nonnegative weights
    and connectivity; an invalid matrix never produces an instance.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidParameter(f"weight matrix must be square, got shape {w.shape}")
        if w.shape[0] < 2:
            raise InvalidParameter("a platoon needs at least 2 vehicles")
        if not np.all(np.isfinite(w)):
            raise InvalidParameter("weights must be finite")
        if np.any(w < 0):
            raise InvalidParameter("weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise InvalidParameter("self-loops are not allowed (nonzero diagonal)")
        scale = max(np.max(np.abs(w)), 1.0)
        if np.max(np.abs(w - w.T)) > 1e-12 * scale:
            raise InvalidParameter("weight matrix must be symmetric")
        w = 0.5 * (w + w.T)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        lam = np.linalg.eigvalsh(laplacian(self))
        if lam[-1] <= 0 or lam[1] <= CONNECTIVITY_RTOL * lam[-1]:
            raise DisconnectedGraph("communication graph is not connected")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def edges(self) -> list[tuple[int, int, float]]:
        i, j = np.nonzero(np.triu(self.weights, 1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def scaled(self, factor: float) -> "WeightedGraph":
        if factor <= 0:
            raise InvalidParameter("scale factor must be positive")
        return WeightedGraph(self.weights * factor)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending Laplacian eigenvalues with an orthogonal eigenvector matrix.

    ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``; ``eigenvalues[0]``
    is exactly 0 and column 0 is exactly ``ones(n) / sqrt(n)``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def pair_weights(self) -> np.ndarray:
        """Squared projections ``((e_{i+1} - e_i)^T q_j)^2``.

        Returns an ``(n-1, n)`` array; row ``i`` is the pair of vehicles
        ``i+1`` and ``i+2`` (0-indexed pair ``i``), column ``j`` the mode.
        Column 0 is identically zero.
        """
        q = self.eigenvectors
        w = (q[1:, :] - q[:-1, :]) ** 2
        w[:, 0] = 0.0
        return w


def laplacian(g: WeightedGraph) -> np.ndarray:
    w = g.weights
    return np.diag(w.sum(axis=1)) - w


def spectrum(L: np.ndarray) -> Spectrum:
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    lam, q = np.linalg.eigh(0.5 * (L + L.T))
    if lam[-1] <= 0 or lam[1] <= CONNECTIVITY_RTOL * lam[-1]:
        raise DisconnectedGraph(
            f"lambda_2 = {lam[1]:.3e} is not separated from zero (lambda_n = {lam[-1]:.3e})"
        )
    lam = lam.copy()
    lam[0] = 0.0
    q = q.copy()
    q[:, 0] = 1.0 / math.sqrt(n)
    for k in range(1, n):
        col = q[:, k]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            q[:, k] = -col
    lam.setflags(write=False)
    q.setflags(write=False)
    return Spectrum(lam, q)


def graph_spectrum(g: WeightedGraph) -> Spectrum:
    return spectrum(laplacian(g))


def effective_resistance(s: Spectrum) -> float:
    """Total effective resistance ``n * sum_{i>=2} 1/lambda_i``."""
    lam = s.eigenvalues[1:]
    if lam[0] <= 0:
        raise DisconnectedGraph("effective resistance is infinite for a disconnected graph")
    return float(s.n * np.sum(1.0 / lam))


# -- named topologies ------------------------------------------------------


def _check_n(n):
    if int(n) != n or n < 2:
        raise InvalidParameter(f"n must be an integer >= 2, got {n}")
    return int(n)


def _check_positive(name, value):
    if not value > 0:
        raise InvalidParameter(f"{name} must be positive, got {value}")


def make_complete(n: int, k: float) -> WeightedGraph:
    n = _check_n(n)
    _check_positive("k", k)
    return WeightedGraph(k * (np.ones((n, n)) - np.eye(n)))


def make_path(n: int, k: float) -> WeightedGraph:
    n = _check_n(n)
    _check_positive("k", k)
    w = np.zeros((n, n))
    idx = np.arange(n - 1)
    w[idx, idx + 1] = w[idx + 1, idx] = k
    return WeightedGraph(w)


def make_p_cycle(n: int, k: float, p: int) -> WeightedGraph:
    """Circulant graph linking every vehicle to its ``p`` nearest neighbours on each side."""
    n = _check_n(n)
    _check_positive("k", k)
    if int(p) != p or p < 1 or 2 * p > n - 1:
        raise InvalidParameter(f"p must be an integer in [1, (n-1)/2], got p={p} for n={n}")
    i = np.arange(n)
    dist = np.abs(i[:, None] - i[None, :])
    dist = np.minimum(dist, n - dist)
    w = np.where((dist >= 1) & (dist <= p), float(k), 0.0)
    return WeightedGraph(w)


def make_spatial(n: int, k0: float, gamma: float) -> WeightedGraph:
    """All-to-all gains decaying as ``k0 * exp(-gamma |i - j|)``."""
    n = _check_n(n)
    _check_positive("k0", k0)
    if gamma < 0:
        raise InvalidParameter("gamma must be nonnegative")
    i = np.arange(n)
    w = k0 * np.exp(-gamma * np.abs(i[:, None] - i[None, :]).astype(float))
    np.fill_diagonal(w, 0.0)
    return WeightedGraph(w)


def make_perturbed_complete(n: int, k_star: float, b: float, seed: int | None = None) -> WeightedGraph:
    """Complete graph with gains ``k_star + b * xi``, one uniform draw per undirected edge."""
    n = _check_n(n)
    _check_positive("k_star", k_star)
    if b < 0:
        raise InvalidParameter("b must be nonnegative")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    xi = rng.uniform(0.0, 1.0, size=iu[0].size)
    w = np.zeros((n, n))
    w[iu] = k_star + b * xi
    w = w + w.T
    return WeightedGraph(w)


def make_random_connected(
    n: int,
    edge_prob: float,
    seed: int | None = None,
    weight_range: tuple[float, float] = (1.0, 1.0),
    max_tries: int = 1000,
) -> WeightedGraph:
    """Erdos-Renyi graph redrawn until connected, weights uniform in ``weight_range``."""
    n = _check_n(n)
    if not 0 < edge_prob <= 1:
        raise InvalidParameter("edge_prob must lie in (0, 1]")
    lo, hi = weight_range
    if not 0 < lo <= hi:
        raise InvalidParameter("weight_range must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    for _ in range(max_tries):
        present = rng.uniform(size=iu[0].size) < edge_prob
        wts = rng.uniform(lo, hi, size=iu[0].size)
        w = np.zeros((n, n))
        w[iu] = np.where(present, wts, 0.0)
        w = w + w.T
        try:
            return WeightedGraph(w)
        except DisconnectedGraph:
            continue
    raise InvalidParameter(f"no connected graph drawn in {max_tries} tries (edge_prob too small)")


# -- closed-form spectra ----------------------------------------------------


def complete_eigenvalues(n: int, k: float) -> np.ndarray:
    lam = np.full(n, k * n, dtype=float)
    lam[0] = 0.0
    return lam


def path_eigenvalues(n: int, k: float) -> np.ndarray:
    """``2k(1 - cos(pi (j-1) / n))`` for j = 1..n (already ascending)."""
    m = np.arange(n)
    return 2.0 * k * (1.0 - np.cos(np.pi * m / n))


def path_eigenvectors(n: int) -> np.ndarray:
    """Cosine eigenvectors of the path Laplacian; column j pairs with ``path_eigenvalues``.

    Entry ``(l, j)`` is ``sqrt(2/n) cos(pi j (2l + 1) / (2n))`` with 0-based
    ``l`` and ``j``; column 0 is the normalised ones vector.
    """
    m = np.arange(n)[None, :]
    l = np.arange(n)[:, None]
    q = math.sqrt(2.0 / n) * np.cos(np.pi * m * (2 * l + 1) / (2 * n))
    q[:, 0] = 1.0 / math.sqrt(n)
    return q


def p_cycle_eigenvalues(n: int, k: float, p: int) -> np.ndarray:
    """Circulant eigenvalues in Fourier order (index m = j - 1), not sorted."""
    m = np.arange(1, n)
    theta = np.pi * m / n
    lam = k * (2 * p + 1 - np.sin((2 * p + 1) * theta) / np.sin(theta))
    return np.concatenate([[0.0], lam])


# -- JSON interchange ---------------------------------------------------------


def graph_to_json(g: WeightedGraph) -> dict:
    return {"n": g.n, "edges": [[i, j, w] for i, j, w in g.edges()]}


def graph_from_json(data: dict) -> WeightedGraph:
    try:
        n = data["n"]
        edges = data["edges"]
    except (KeyError, TypeError) as exc:
        raise InvalidParameter("graph JSON needs keys 'n' and 'edges'") from exc
    n = _check_n(n)
    w = np.zeros((n, n))
    for edge in edges:
        if len(edge) != 3:
            raise InvalidParameter(f"edge {edge!r} must be [i, j, weight]")
        i, j, wt = edge
        if int(i) != i or int(j) != j or not 0 <= i < j < n:
            raise InvalidParameter(f"edge {edge!r} needs integer endpoints 0 <= i < j < n")
        if not wt > 0:
            raise InvalidParameter(f"edge {edge!r} must have positive weight")
        if w[int(i), int(j)] != 0:
            raise InvalidParameter(f"duplicate edge ({i}, {j})")
        w[int(i), int(j)] = w[int(j), int(i)] = float(wt)
    return WeightedGraph(w)


def load_graph(path: str | Path) -> WeightedGraph:
    return graph_from_json(json.loads(Path(path).read_text()))


def save_graph(g: WeightedGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_json(g), indent=2) + "\n")
