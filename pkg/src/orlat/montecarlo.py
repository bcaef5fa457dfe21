"""Simulation of the walk, of its first return to the axis and of the
excursion-plus-geometric-runs representation of that return.

Bulk samplers split the work into chunks.  Chunk ``i`` of a run tagged
``tag`` draws from its own stream seeded by
``SeedSequence([seed, tag, i])``, so results depend only on
``(seed, n, chunk_size)`` and never on the number of worker threads.
Streams differ between the compiled and the numpy backend; each backend is
reproducible on its own.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from . import _kernels
from ._accel import max_threads
from .lattice import DEFAULT_KERNEL, Kernel, SignRule, Table, Vertex, as_vertex
from .spectral import DEFAULT_VARIANT, PhiVariant, as_variant

DEFAULT_CAP = 10**8
DEFAULT_CHUNK = 2**16
_BLOCK = 4096

# stream tags, one per sampler
_TAG_DIRECT, _TAG_GEOM, _TAG_VISITS = 1, 2, 3


def _orient_args(k: Kernel):
    o = k.orientation
    if isinstance(o, SignRule):
        return True, np.zeros(1, dtype=np.int64), 0, 0
    if isinstance(o, Table):
        if o.values:
            lo, hi = min(o.values), max(o.values)
            rows = np.array([o.at(y) for y in range(lo, hi + 1)], dtype=np.int64)
        else:
            lo, rows = 0, np.zeros(0, dtype=np.int64)
        return False, rows, lo, o.default
    raise TypeError(f"unsupported orientation {type(o).__name__}")


def _monotone_halves(k: Kernel) -> bool:
    """True when the abscissa is monotone between axis visits (early stopping is exact)."""
    return isinstance(k.orientation, SignRule)


def chunk_seed(seed: int, tag: int, chunk: int) -> int:
    """32-bit seed of one chunk's stream."""
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), tag, chunk]).generate_state(1)[0])


def _chunks(n: int, chunk_size: int):
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    return [(i, min(chunk_size, n - start)) for i, start in enumerate(range(0, n, chunk_size))]


def _run_chunks(fn, n: int, chunk_size: int, threads: int | None):
    """Evaluate ``fn(chunk_index, size)`` over all chunks; results in chunk order."""
    jobs = _chunks(n, chunk_size)
    workers = min(threads or max_threads(), len(jobs)) if jobs else 1
    if workers <= 1:
        return [fn(i, m) for i, m in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


# ------------------------------------------------------------------ types


@dataclass(frozen=True)
class Trajectory:
    """A simulated path; ``steps[0]`` is the start and ``steps[n]`` the position at time ``n``."""

    start: Vertex
    steps: tuple[Vertex, ...]
    axis_hits: tuple[tuple[int, int], ...]

    @property
    def n_steps(self) -> int:
        return len(self.steps) - 1

    def local_times(self, upto: int | None = None) -> dict[Vertex, int]:
        """Visit counts at times ``0..upto-1`` (whole path by default)."""
        upto = self.n_steps if upto is None else upto
        out: dict[Vertex, int] = {}
        for v in self.steps[:upto]:
            out[v] = out.get(v, 0) + 1
        return out


@dataclass(frozen=True)
class GeomExcursion:
    """One vertical excursion from 0 back to 0 with its horizontal runs.

    ``geom_draws[i]`` is the number of horizontal steps taken during the
    visit at time ``i + 1`` (the interior of ``y_path``); the horizontal
    direction of that visit is the orientation of its level.
    """

    y_path: tuple[int, ...]
    local_times: Mapping[int, int]
    geom_draws: tuple[int, ...]
    x_displacement: int

    @property
    def sigma(self) -> int:
        return len(self.y_path) - 1

    @property
    def time_change(self) -> int:
        """Walk time at the matching axis return: vertical steps plus horizontal runs."""
        return self.sigma + sum(self.geom_draws)

    def recompute_displacement(self, k: Kernel = DEFAULT_KERNEL) -> int:
        return sum(k.orientation.at(y) * xi for y, xi in zip(self.y_path[1:-1], self.geom_draws))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_samples: int
    seed: int

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return self.value - z * self.stderr, self.value + z * self.stderr


@dataclass(frozen=True)
class BulkSample:
    """Raw output of a bulk sampler.

    ``status`` holds 0 for finished draws, 1 for draws censored by the step
    cap and 2 for draws stopped once ``|value| > bin_limit``.
    """

    values: np.ndarray
    status: np.ndarray
    steps: np.ndarray
    seed: int
    chunk_size: int

    @property
    def censored(self) -> int:
        return int(np.count_nonzero(self.status == _kernels.CENSORED))

    @property
    def saturated(self) -> int:
        return int(np.count_nonzero(self.status == _kernels.SATURATED))


@dataclass(frozen=True)
class EmpiricalLaw:
    """Empirical law of the first-hit abscissa; censored draws count as deficit."""

    counts: Mapping[int, int]
    n_samples: int
    censored: int
    seed: int

    def prob(self, z: int) -> float:
        return self.counts.get(z, 0) / self.n_samples

    def stderr(self, z: int) -> float:
        p = self.prob(z)
        return math.sqrt(p * (1 - p) / self.n_samples)

    @property
    def deficit(self) -> float:
        return self.censored / self.n_samples

    def mean(self) -> float:
        total = sum(self.counts.values())
        return sum(z * c for z, c in self.counts.items()) / total


# ------------------------------------------------------------ single draws


def simulate(k: Kernel, x, n_steps: int, rng: np.random.Generator) -> Trajectory:
    """Simulate ``n_steps`` steps from ``x``; one uniform per step."""
    x = as_vertex(x)
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    u = rng.random(n_steps)
    xs, ys = _kernels.walk(x.x1, x.x2, u, *_orient_args(k))
    steps = tuple(Vertex(int(a), int(b)) for a, b in zip(xs, ys))
    hits = tuple((int(t), int(xs[t])) for t in np.nonzero(ys[1:] == 0)[0] + 1)
    return Trajectory(x, steps, hits)


def sample_induced_direct(k: Kernel, rng: np.random.Generator, *, start=(0, 0),
                          cap: int = DEFAULT_CAP, max_resamples: int = 1000) -> int:
    """Abscissa of the first axis visit at time >= 1 from ``start``.

    Draws are simulated in blocks of uniforms; a draw that reaches ``cap``
    steps is discarded and resampled.  Use :func:`induced_direct_sample`
    for bulk draws with censoring counts.
    """
    s = as_vertex(start)
    args = _orient_args(k)
    for _ in range(max_resamples):
        a, b, t = s.x1, s.x2, 0
        while t < cap:
            m = min(_BLOCK, cap - t)
            xs, ys = _kernels.walk(a, b, rng.random(m), *args)
            hit = np.nonzero(ys[1:] == 0)[0]
            if hit.size:
                return int(xs[hit[0] + 1])
            a, b, t = int(xs[-1]), int(ys[-1]), t + m
    raise RuntimeError(f"{max_resamples} consecutive draws hit the step cap {cap}")


def _geom_q(variant) -> float:
    """Success probability of the per-visit geometric law under each convention."""
    v = as_variant(variant)
    # excursion form: a horizontal step has probability 1/3, so the run
    # length has P(k) = (2/3)(1/3)**k; the other reading swaps the roles
    return 2.0 / 3.0 if v is PhiVariant.EXCURSION else 1.0 / 3.0


def sample_induced_geometric(rng: np.random.Generator, *, k: Kernel = DEFAULT_KERNEL,
                             variant=None, cap: int = DEFAULT_CAP) -> GeomExcursion:
    """Vertical excursion of a simple random walk plus geometric horizontal runs.

    Raises ``RuntimeError`` when the excursion exceeds ``cap`` steps.
    """
    q = _geom_q(DEFAULT_VARIANT if variant is None else variant)
    path = [0]
    y = 0
    while True:
        m = min(_BLOCK, cap - (len(path) - 1))
        if m <= 0:
            raise RuntimeError(f"excursion exceeded the step cap {cap}")
        inc = np.where(rng.random(m) < 0.5, 1, -1)
        ys = y + np.cumsum(inc)
        zero = np.nonzero(ys == 0)[0]
        if zero.size:
            path.extend(ys[: zero[0] + 1].tolist())
            break
        path.extend(ys.tolist())
        y = int(ys[-1])
    interior = np.asarray(path[1:-1], dtype=np.int64)
    draws = rng.geometric(q, interior.size) - 1
    eps = np.array([k.orientation.at(int(v)) for v in interior], dtype=np.int64)
    disp = int(np.dot(eps, draws)) if interior.size else 0
    levels, counts = np.unique(np.asarray(path[:-1]), return_counts=True)
    return GeomExcursion(
        y_path=tuple(int(v) for v in path),
        local_times={int(a): int(c) for a, c in zip(levels, counts)},
        geom_draws=tuple(int(d) for d in draws),
        x_displacement=disp,
    )


# ------------------------------------------------------------ bulk draws


def induced_direct_sample(n: int, seed: int, *, k: Kernel = DEFAULT_KERNEL, start=(0, 0),
                          cap: int = DEFAULT_CAP, bin_limit: int = -1,
                          chunk_size: int = DEFAULT_CHUNK, threads: int | None = None) -> BulkSample:
    """``n`` independent first-hit abscissas from ``start``.

    With ``bin_limit >= 0`` a draw stops as soon as its abscissa leaves
    ``[-bin_limit, bin_limit]``; only allowed when the abscissa cannot come
    back before the axis visit.
    """
    s = as_vertex(start)
    if bin_limit >= 0 and not _monotone_halves(k):
        raise ValueError("early stopping needs an orientation that is one-signed on each half plane")
    args = _orient_args(k)

    def run(i, m):
        return _kernels.first_hit(chunk_seed(seed, _TAG_DIRECT, i), m, s.x1, s.x2, cap, bin_limit,
                                  *args)

    return _assemble(_run_chunks(run, n, chunk_size, threads), seed, chunk_size)


def induced_geometric_sample(n: int, seed: int, *, k: Kernel = DEFAULT_KERNEL, variant=None,
                             cap: int = DEFAULT_CAP, bin_limit: int = -1,
                             chunk_size: int = DEFAULT_CHUNK,
                             threads: int | None = None) -> BulkSample:
    """``n`` displacements from the excursion-plus-geometric-runs representation."""
    if bin_limit >= 0 and not _monotone_halves(k):
        raise ValueError("early stopping needs an orientation that is one-signed on each half plane")
    q = _geom_q(DEFAULT_VARIANT if variant is None else variant)
    args = _orient_args(k)

    def run(i, m):
        return _kernels.geometric_excursions(chunk_seed(seed, _TAG_GEOM, i), m, q, cap, bin_limit,
                                             *args)

    return _assemble(_run_chunks(run, n, chunk_size, threads), seed, chunk_size)


def _assemble(parts, seed, chunk_size) -> BulkSample:
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return BulkSample(empty, empty.astype(np.int8), empty, seed, chunk_size)
    vals, status, steps = (np.concatenate(p) for p in zip(*parts))
    return BulkSample(vals, status, steps, seed, chunk_size)


# ------------------------------------------------------------ estimators


def estimate_green(k: Kernel, x, y, n_paths: int, horizon: int, seed: int, *,
                   chunk_size: int = DEFAULT_CHUNK, threads: int | None = None) -> Estimate:
    """Mean number of visits to ``y`` at times ``0..horizon``; unbiased for the truncated Green sum."""
    x, y = as_vertex(x), as_vertex(y)
    if n_paths < 1 or horizon < 0:
        raise ValueError("need n_paths >= 1 and horizon >= 0")
    args = _orient_args(k)

    def run(i, m):
        return (_kernels.visit_counts(chunk_seed(seed, _TAG_VISITS, i), m, x.x1, x.x2, y.x1, y.x2,
                                      horizon, *args),)

    counts = np.concatenate([p[0] for p in _run_chunks(run, n_paths, chunk_size, threads)])
    mean = float(counts.mean())
    sd = float(counts.std(ddof=1)) if n_paths > 1 else 0.0
    return Estimate(mean, sd / math.sqrt(n_paths), n_paths, seed)


def estimate_nu(k: Kernel, x, n_paths: int, seed: int, *, cap: int = DEFAULT_CAP,
                chunk_size: int = DEFAULT_CHUNK, threads: int | None = None) -> EmpiricalLaw:
    """Empirical law of the first axis abscissa from ``x``; capped draws are deficit."""
    bulk = induced_direct_sample(n_paths, seed, k=k, start=x, cap=cap, chunk_size=chunk_size,
                                 threads=threads)
    done = bulk.values[bulk.status == _kernels.DONE]
    z, c = np.unique(done, return_counts=True)
    return EmpiricalLaw({int(a): int(b) for a, b in zip(z, c)}, n_paths, bulk.censored, seed)


# ------------------------------------------------------------ tests


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    pvalue: float
    dof: int
    table: np.ndarray
    censored: tuple[int, int]


def binned_counts(values: np.ndarray, status: np.ndarray, limit: int) -> np.ndarray:
    """Counts over ``[< -limit, -limit, ..., limit, > limit]``; censored draws are skipped."""
    keep = status != _kernels.CENSORED
    v = np.clip(values[keep], -limit - 1, limit + 1)
    return np.bincount(v + limit + 1, minlength=2 * limit + 3)


def chi2_direct_vs_geometric(n: int, seed: int, *, k: Kernel = DEFAULT_KERNEL, variant=None,
                             limit: int = 30, cap: int = DEFAULT_CAP,
                             chunk_size: int = DEFAULT_CHUNK,
                             threads: int | None = None) -> Chi2Result:
    """Two-sample chi-square test of the two samplers on binned displacement."""
    direct = induced_direct_sample(n, seed, k=k, cap=cap, bin_limit=limit, chunk_size=chunk_size,
                                   threads=threads)
    geom = induced_geometric_sample(n, seed, k=k, variant=variant, cap=cap, bin_limit=limit,
                                    chunk_size=chunk_size, threads=threads)
    table = np.vstack([binned_counts(direct.values, direct.status, limit),
                       binned_counts(geom.values, geom.status, limit)])
    table = table[:, table.sum(axis=0) > 0]
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return Chi2Result(float(stat), float(p), int(dof), table, (direct.censored, geom.censored))


def hitting_time_tail(steps: np.ndarray, thresholds) -> tuple[np.ndarray, float]:
    """Empirical ``P(tau > T)`` at each threshold and its log-log slope.

    The first return of a one-dimensional walk has a tail of order
    ``T**-0.5``, so the slope should be close to -1/2.
    """
    steps = np.asarray(steps)
    thr = np.asarray(thresholds, dtype=float)
    surv = np.array([np.mean(steps > t) for t in thr])
    ok = surv > 0
    slope = float(np.polyfit(np.log(thr[ok]), np.log(surv[ok]), 1)[0]) if ok.sum() >= 2 else math.nan
    return surv, slope


__all__ = [
    "BulkSample",
    "Chi2Result",
    "EmpiricalLaw",
    "Estimate",
    "GeomExcursion",
    "Trajectory",
    "binned_counts",
    "chi2_direct_vs_geometric",
    "chunk_seed",
    "estimate_green",
    "estimate_nu",
    "hitting_time_tail",
    "induced_direct_sample",
    "induced_geometric_sample",
    "sample_induced_direct",
    "sample_induced_geometric",
    "simulate",
]
