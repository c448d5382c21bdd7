"""Monte-Carlo oracle: Euler-Maruyama integration of the delayed stochastic platoon.

    dx = v dt
    dv = -L v(t - tau) dt - beta L (x(t - tau) - dd) dt + g dW,   dd = d (1, ..., n)

Replicas are integrated together as an ``(R, n)`` batch.  Every replica owns
a generator spawned from the run seed and draws its noise in fixed-size
blocks, so results do not depend on how replicas are grouped or threaded.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientSamples, InvalidParameter, InvalidTimestep, NonfiniteState
from .graph import WeightedGraph, graph_spectrum, laplacian
from .risk import COLLISION, EventSpec, RiskValue, risk
from .stability import StabilityVerdict, platoon_stable

NOISE_BLOCK = 1024
WILSON_Z = 1.959963984540054


class UnstableModelWarning(UserWarning):
    pass


class DelayRoundingWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PlatoonModel:
    graph: WeightedGraph
    beta: float
    tau: float
    g: float
    d: float

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidParameter("beta must be positive")
        if self.tau < 0:
            raise InvalidParameter("tau must be nonnegative")
        if not self.d > 0:
            raise InvalidParameter("d must be positive")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def spacing(self) -> np.ndarray:
        return self.d * np.arange(1, self.n + 1, dtype=float)

    def stability(self) -> StabilityVerdict:
        return platoon_stable(graph_spectrum(self.graph), self.beta, self.tau)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.graph.weights).tobytes())
        h.update(np.array([self.beta, self.tau, self.g, self.d]).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class InitialCondition:
    """Constant history on ``[-tau, 0]``: positions ``dd + offset``, velocities ``velocity``."""

    offset: np.ndarray | None = None
    velocity: np.ndarray | None = None


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def relative_distances(self) -> np.ndarray:
        return np.diff(self.x, axis=-1)


def delay_steps(tau: float, dt: float) -> int:
    """Delay buffer length ``round(tau/dt)``; warns if ``tau/dt`` is not an integer."""
    if not dt > 0 or not math.isfinite(dt):
        raise InvalidTimestep(f"dt must be positive, got {dt}")
    ratio = tau / dt
    D = int(round(ratio))
    if tau > 0 and D == 0:
        raise InvalidTimestep(f"dt={dt} is too coarse to resolve tau={tau}")
    if abs(ratio - D) > 1e-9 * max(1.0, ratio):
        warnings.warn(
            f"tau/dt = {ratio:.6g} is not an integer; delay buffer rounded to {D} steps",
            DelayRoundingWarning,
            stacklevel=3,
        )
    return D


def _check_run(model, dt, T):
    D = delay_steps(model.tau, dt)
    if not T > model.tau or not T > 0:
        raise InvalidTimestep(f"horizon T={T} must exceed tau={model.tau}")
    steps = int(round(T / dt))
    if steps < 1:
        raise InvalidTimestep("horizon shorter than one step")
    if not model.stability().stable:
        warnings.warn("model lies outside the stability region; trajectories may diverge", UnstableModelWarning, stacklevel=3)
    return D, steps


def replica_generators(seed, replicas: int, first: int = 0):
    """One independent generator per replica, spawned from ``seed``."""
    root = np.random.SeedSequence(seed)
    return [np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(r,))) for r in range(first, first + replicas)]


def _integrate(model, dt, D, steps, rngs, initial, record):
    """Advance ``len(rngs)`` replicas by ``steps`` steps.

    ``record`` is a sorted array of step indices (0..steps) whose states are
    returned as ``(R, len(record), n)`` positions and velocities.
    """
    R, n = len(rngs), model.n
    L = laplacian(model.graph)
    dd = model.spacing
    beta, g = model.beta, model.g
    sq = g * math.sqrt(dt)
    M = D + 1
    x0 = dd + (np.zeros(n) if initial is None or initial.offset is None else np.asarray(initial.offset, float))
    v0 = np.zeros(n) if initial is None or initial.velocity is None else np.asarray(initial.velocity, float)
    X = np.broadcast_to(x0, (M, R, n)).copy()
    V = np.broadcast_to(v0, (M, R, n)).copy()
    out_x = np.empty((R, len(record), n))
    out_v = np.empty((R, len(record), n))
    slot = 0
    if record.size and record[0] == 0:
        out_x[:, 0], out_v[:, 0] = X[0], V[0]
        slot = 1
    noise = None
    for k in range(steps):
        b = k % NOISE_BLOCK
        if b == 0 and g != 0:
            m = min(NOISE_BLOCK, steps - k)
            noise = np.stack([rng.standard_normal((m, n)) for rng in rngs], axis=1)
        cur, nxt = k % M, (k + 1) % M
        x, v = X[cur], V[cur]
        acc = (V[nxt] + beta * (X[nxt] - dd)) @ L
        X[nxt] = x + v * dt
        V[nxt] = v - acc * dt
        if g != 0:
            V[nxt] += sq * noise[b]
        if b == NOISE_BLOCK - 1 or k == steps - 1:
            if not (np.all(np.isfinite(X[nxt])) and np.all(np.isfinite(V[nxt]))):
                raise NonfiniteState(f"state became non-finite at t={(k + 1) * dt:.6g}; the model is unstable")
        while slot < len(record) and record[slot] == k + 1:
            out_x[:, slot], out_v[:, slot] = X[nxt], V[nxt]
            slot += 1
    return out_x, out_v


def simulate(model: PlatoonModel, dt: float, T: float, seed=None, initial: InitialCondition | None = None, record_every: int = 1) -> Trajectory:
    """One trajectory on ``[0, T]`` recorded every ``record_every`` steps."""
    D, steps = _check_run(model, dt, T)
    record = np.arange(0, steps + 1, max(1, int(record_every)))
    if record[-1] != steps:
        record = np.append(record, steps)
    xs, vs = _integrate(model, dt, D, steps, replica_generators(seed, 1), initial, record)
    return Trajectory(record * dt, xs[0], vs[0])


# -- steady-state ensembles ---------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Steady-state relative distances ``x_{i+1} - x_i`` at common timestamps.

    ``samples`` has shape ``(replicas, times, n - 1)``.
    """

    replica_count: int
    dt: float
    T: float
    burn_in: float
    stride: int
    seed: int | None
    times: np.ndarray
    samples: np.ndarray
    model_hash: str = ""
    d: float = 1.0
    extra: dict = field(default_factory=dict)

    @property
    def pair_count(self) -> int:
        return self.samples.shape[2]

    @property
    def samples_per_pair(self) -> int:
        return self.samples.shape[0] * self.samples.shape[1]

    def pair(self, i: int) -> np.ndarray:
        """Pooled samples of pair ``i`` (0-based), replica-major order."""
        return self.samples[:, :, i].ravel()

    def joint(self) -> np.ndarray:
        """``(replicas * times, n - 1)`` rows of simultaneous distances."""
        return self.samples.reshape(-1, self.pair_count)

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "dt": self.dt,
            "T": self.T,
            "burn_in": self.burn_in,
            "stride": self.stride,
            "replicas": self.replica_count,
            "model_hash": self.model_hash,
        }

    def write_metadata(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")

    def to_csv(self, path: str | Path, digits: int = 10) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["replica", "t", "pair_index", "rel_distance"])
            for r in range(self.samples.shape[0]):
                for k, t in enumerate(self.times):
                    for i in range(self.pair_count):
                        out.writerow([r, f"{t:.{digits}g}", i + 1, f"{self.samples[r, k, i]:.{digits}g}"])


def steady_state_samples(
    model: PlatoonModel,
    dt: float = 1e-3,
    T: float = 50.0,
    burn_in: float | None = None,
    stride: int | None = None,
    replicas: int = 100,
    seed=None,
    workers: int = 1,
    batch: int = 256,
) -> TrajectoryEnsemble:
    """Relative distances sampled every ``stride`` steps after ``burn_in``.

    Defaults: ``burn_in = max(10 tau, T/2)`` and ``stride = max(1, ceil(tau/dt))``.
    Replicas are integrated in chunks of ``batch``; the noise is fixed per
    replica, so ``workers`` never changes the result and a different
    ``batch`` only changes the last bits of the coupling product.
    """
    D, steps = _check_run(model, dt, T)
    if burn_in is None:
        burn_in = max(10 * model.tau, T / 2)
    min_stride = max(1, math.ceil(model.tau / dt - 1e-9))
    if stride is None:
        stride = min_stride
    if stride < min_stride:
        raise InvalidParameter(f"stride must be at least ceil(tau/dt) = {min_stride}")
    if replicas < 1:
        raise InvalidParameter("need at least one replica")
    B = int(round(burn_in / dt))
    if B >= steps:
        raise InvalidParameter("burn-in covers the whole horizon")
    record = np.arange(B + stride, steps + 1, stride)
    if record.size == 0:
        raise InvalidParameter("no sample falls after burn-in; shorten the stride or extend T")
    chunks = [(s, min(batch, replicas - s)) for s in range(0, replicas, batch)]

    def run(chunk):
        first, count = chunk
        xs, _ = _integrate(model, dt, D, steps, replica_generators(seed, count, first), None, record)
        return np.diff(xs, axis=-1)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    samples = np.concatenate(parts, axis=0)
    samples.setflags(write=False)
    return TrajectoryEnsemble(
        replica_count=replicas,
        dt=dt,
        T=T,
        burn_in=burn_in,
        stride=stride,
        seed=seed,
        times=record * dt,
        samples=samples,
        model_hash=model.digest(),
        d=model.d,
    )


# -- empirical risk ------------------------------------------------------------------


def _order_index(eps, N):
    k = math.ceil(eps * N - 1e-9)
    return max(k, 1)


def empirical_quantile(y, eps: float, upper: bool = False) -> float:
    """Conservative order-statistic quantile: the ``ceil(eps N)``-th smallest
    (or, with ``upper``, largest) sample."""
    y = np.sort(np.asarray(y, dtype=float))
    k = _order_index(eps, y.size)
    return float(y[y.size - k] if upper else y[k - 1])


def risk_from_quantile(q: float, spec: EventSpec) -> RiskValue:
    if spec.kind == COLLISION:
        if q <= 0:
            return RiskValue.infinite()
        return RiskValue.finite(spec.d / q - spec.c)
    gap = spec.a * spec.d - q
    if gap <= 0:
        return RiskValue.infinite()
    return RiskValue.finite(1.0 / gap - spec.h)


def _check_count(N, eps):
    if N < 10.0 / eps:
        raise InsufficientSamples(f"{N} samples per pair; need at least {math.ceil(10 / eps)} for eps={eps}")


def empirical_risk(ens: TrajectoryEnsemble, spec: EventSpec) -> list[RiskValue]:
    """Per-pair value-at-risk from empirical quantiles of the ensemble."""
    _check_count(ens.samples_per_pair, spec.eps)
    upper = spec.kind != COLLISION
    return [risk_from_quantile(empirical_quantile(ens.pair(i), spec.eps, upper), spec) for i in range(ens.pair_count)]


# -- joint events ----------------------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Nested event: ``outer`` over groups, the opposite operation inside each group.

    ``Partition(((0, 1), (2, 3)), outer="union")`` is
    ``(U0 and U1) or (U2 and U3)``.
    """

    groups: tuple
    outer: str = "union"


@dataclass(frozen=True)
class JointEstimate:
    p: float
    lo: float
    hi: float
    count: int
    n: int
    marginals: np.ndarray


def wilson_interval(count: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    if n <= 0:
        raise InsufficientSamples("no samples")
    p = count / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z / den * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    lo = 0.0 if count == 0 else max(0.0, centre - half)
    hi = 1.0 if count == n else min(1.0, centre + half)
    return lo, hi


def event_indicators(rows, specs, delta) -> np.ndarray:
    """Boolean ``(N, n-1)`` matrix: pair ``i`` in its event set for index ``delta[i]``."""
    m = rows.shape[1]
    if isinstance(specs, EventSpec):
        specs = [specs] * m
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (m,))
    if len(specs) != m:
        raise InvalidParameter(f"need {m} event specs, got {len(specs)}")
    if np.any(delta < 0):
        raise InvalidParameter("delta must be componentwise nonnegative")
    return np.column_stack([specs[i].contains(rows[:, i], delta[i]) for i in range(m)])


def _combine(ind, mode):
    if mode == "union":
        return ind.any(axis=1)
    if mode == "intersection":
        return ind.all(axis=1)
    if isinstance(mode, Partition):
        inner = "intersection" if mode.outer == "union" else "union"
        cols = [_combine(ind[:, list(g)], inner) for g in mode.groups]
        return _combine(np.column_stack(cols), mode.outer)
    raise InvalidParameter(f"unknown joint mode {mode!r}")


def joint_event_probability(ens: TrajectoryEnsemble, specs, delta, mode="union") -> JointEstimate:
    """Probability of a joint event over pairs, evaluated row by row at common timestamps."""
    rows = ens.joint()
    if rows.shape[0] == 0:
        raise InsufficientSamples("ensemble is empty")
    ind = event_indicators(rows, specs, delta)
    hit = _combine(ind, mode)
    count, N = int(hit.sum()), hit.size
    lo, hi = wilson_interval(count, N)
    return JointEstimate(count / N, lo, hi, count, N, ind.mean(axis=0))


def _risk_delta(r: RiskValue) -> float:
    return math.inf if r.is_infinite else r.value


def union_delta_risk(ens: TrajectoryEnsemble, spec: EventSpec, sigma=None):
    """Monte-Carlo union risk along an equal-marginal-level path.

    For a level ``eta`` every pair gets its risk at level ``eta``: the
    empirical one by default, or the closed form for the deviations
    ``sigma`` when given.  The union risk is the point of this path at the
    largest ``eta`` whose empirical union probability stays below
    ``spec.eps``.  Returns ``(risks, eta)``.
    """
    _check_count(ens.samples_per_pair, spec.eps)
    rows = ens.joint()
    N = rows.shape[0]
    upper = spec.kind != COLLISION

    def union_prob(risks):
        if any(r.is_infinite for r in risks):
            return 0.0
        ind = event_indicators(rows, spec, [_risk_delta(r) for r in risks])
        return float(ind.any(axis=1).mean())

    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (rows.shape[1],):
            raise InvalidParameter("sigma needs one entry per pair")

        def point(eta):
            return [risk(float(s), spec.with_eps(eta)) for s in sigma]

        lo, hi = 1.0 / N, spec.eps
        if union_prob(point(lo)) >= spec.eps:
            raise InsufficientSamples("union probability exceeds eps even at the smallest level")
        if union_prob(point(hi)) < spec.eps:
            return point(hi), hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if union_prob(point(mid)) < spec.eps:
                lo = mid
            else:
                hi = mid
        return point(lo), lo

    sorted_pairs = np.sort(rows, axis=0)

    def point_k(k):
        qs = sorted_pairs[N - k] if upper else sorted_pairs[k - 1]
        return [risk_from_quantile(float(q), spec) for q in qs]

    lo, hi = 1, _order_index(spec.eps, N)
    if union_prob(point_k(lo)) >= spec.eps:
        raise InsufficientSamples("union probability exceeds eps even at the smallest level")
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if union_prob(point_k(mid)) < spec.eps:
            lo = mid
        else:
            hi = mid - 1
    return point_k(lo), lo / N
