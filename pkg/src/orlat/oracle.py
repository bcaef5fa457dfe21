"""Exact finite-horizon computations: laws of the walk, truncated Green sums,
first arrival on the axis and the expected local times before it.

Two arithmetic modes are offered.  ``"exact"`` propagates
:class:`fractions.Fraction` weights over a sparse support, iterated in sorted
order so results are reproducible bit for bit.  ``"float"`` pushes float64
mass over a dense window with the compiled sweep kernel; mass that leaves
the window or is pruned below ``prune_tol`` is never silently dropped, it
is reported as a deficit.  ``"auto"`` picks exact arithmetic for horizons up
to :data:`EXACT_AUTO_LIMIT`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from . import _kernels
from .lattice import Kernel, SignRule, Vertex, as_vertex

EXACT_AUTO_LIMIT = 40
DEFAULT_MAX_CELLS = 12_000_000
DEFAULT_MAX_SUPPORT = 2_000_000
DEFAULT_PRUNE_TOL = 1e-24

Weight = Fraction | float


class ResourceLimitError(MemoryError):
    """The requested computation would exceed the configured size cap."""


def _resolve_mode(mode: str, horizon: int) -> str:
    if mode == "auto":
        return "exact" if horizon <= EXACT_AUTO_LIMIT else "float"
    if mode not in ("exact", "float"):
        raise ValueError(f"mode must be 'auto', 'exact' or 'float', got {mode!r}")
    return mode


def _check_horizon(n: int, minimum: int = 0) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise TypeError(f"horizon must be an integer, got {n!r}")
    if n < minimum:
        raise ValueError(f"horizon must be >= {minimum}, got {n}")
    return int(n)


# ------------------------------------------------------------------ measures


class VertexDict(dict):
    """Dict keyed by :class:`Vertex` that also accepts ``(x1, x2)`` tuples on lookup."""

    def __getitem__(self, v):
        return super().__getitem__(as_vertex(v))

    def get(self, v, default=None):
        return super().get(as_vertex(v), default)

    def __contains__(self, v):
        try:
            return super().__contains__(as_vertex(v))
        except (TypeError, ValueError):
            return False


@dataclass(frozen=True)
class SparseDistribution:
    """Finite measure on the lattice with total mass at most one.

    ``deficit`` is mass known to be missing: killed, escaped from a float
    window or pruned.  In exact mode it is tracked exactly as well.
    """

    weights: Mapping[Vertex, Weight]
    exact: bool = True
    deficit: Weight = 0

    def __post_init__(self):
        clean = {}
        for v, w in self.weights.items():
            if w < 0:
                raise ValueError(f"negative weight {w!r} at {v!r}")
            if w > 0:
                clean[as_vertex(v)] = Fraction(w) if self.exact else float(w)
        object.__setattr__(self, "weights", VertexDict(sorted(clean.items())))

    @classmethod
    def point(cls, v, exact: bool = True) -> "SparseDistribution":
        return cls({as_vertex(v): Fraction(1) if exact else 1.0}, exact=exact)

    @property
    def total_mass(self) -> Weight:
        if self.exact:
            return sum(self.weights.values(), Fraction(0))
        return math.fsum(self.weights.values())

    def __getitem__(self, v) -> Weight:
        return self.weights.get(as_vertex(v), Fraction(0) if self.exact else 0.0)

    def __len__(self) -> int:
        return len(self.weights)

    def support_radius(self, center=(0, 0)) -> int:
        c = as_vertex(center)
        return max((abs(v.x1 - c.x1) + abs(v.x2 - c.x2) for v in self.weights), default=0)


class LatticeMeasure(Mapping):
    """Read-only measure assembled from dense blocks and isolated points.

    Blocks are ``(x0, y0, array)`` with ``array[i, j]`` the weight of
    ``(x0 + i, y0 + j)``.  Blocks and points must not overlap; iteration
    visits nonzero entries only.
    """

    def __init__(self, blocks=(), points: Mapping | None = None):
        self._blocks = [(int(x0), int(y0), np.asarray(a)) for x0, y0, a in blocks]
        self._points = {as_vertex(v): w for v, w in (points or {}).items() if w}

    def __getitem__(self, v) -> float:
        v = as_vertex(v)
        if v in self._points:
            return self._points[v]
        for x0, y0, a in self._blocks:
            i, j = v.x1 - x0, v.x2 - y0
            if 0 <= i < a.shape[0] and 0 <= j < a.shape[1] and a[i, j] != 0:
                return float(a[i, j])
        raise KeyError(v)

    def get(self, v, default=0.0):
        try:
            return self[v]
        except KeyError:
            return default

    def __iter__(self) -> Iterator[Vertex]:
        yield from self._points
        for x0, y0, a in self._blocks:
            ii, jj = np.nonzero(a)
            for i, j in zip(ii.tolist(), jj.tolist()):
                yield Vertex(x0 + i, y0 + j)

    def __len__(self) -> int:
        return len(self._points) + sum(int(np.count_nonzero(a)) for _, _, a in self._blocks)

    @property
    def blocks(self) -> tuple:
        return tuple(self._blocks)

    @property
    def points(self) -> Mapping:
        return dict(self._points)

    def total(self) -> float:
        return math.fsum(float(w) for w in self._points.values()) + math.fsum(
            float(a.sum()) for _, _, a in self._blocks
        )


# ------------------------------------------------------------ exact stepping


def _exact_step(k: Kernel, mass: dict, factor: Fraction, kill_axis: bool):
    """One kernel application on a sparse Fraction measure.

    Returns ``(next_mass, hits)`` with ``hits`` the mass arriving on row 0
    when ``kill_axis`` is set (binned by abscissa), otherwise empty.
    """
    out: dict[Vertex, Fraction] = {}
    hits: dict[int, Fraction] = {}
    for u in sorted(mass):
        m = mass[u] * factor
        for v, p in k.out_neighbors(u):
            w = m * p
            if kill_axis and v.x2 == 0:
                hits[v.x1] = hits.get(v.x1, Fraction(0)) + w
            else:
                out[v] = out.get(v, Fraction(0)) + w
    return out, hits


def _cap_support(mass: dict, max_support: int):
    if len(mass) > max_support:
        raise ResourceLimitError(f"support of {len(mass)} vertices exceeds max_support={max_support}")


# ------------------------------------------------------------ float windows


def _horizontal_extent(k: Kernel, ylo: int, yhi: int, n: int) -> tuple[int, int]:
    """How far mass can drift left and right in ``n`` steps on rows ``ylo..yhi``."""
    if n <= 0:
        return 0, 0
    # horizontal moves are at most Binomial(n, 1/3) on oriented rows; beyond
    # twelve standard deviations the window edge counts mass as deficit
    reach = min(n, math.ceil(n / 3 + 12 * math.sqrt(2 * n / 9)) + 2)
    signs = k.orientation.signs_on(ylo, yhi)
    return (reach if -1 in signs else 0), (reach if 1 in signs else 0)


def _vertical_reach(n: int) -> int:
    return min(n, math.ceil(10 * math.sqrt(n)) + 2)


@dataclass
class _Window:
    x0: int
    y0: int
    nx: int
    ny: int
    axis_j: int
    eps: np.ndarray

    def cells(self) -> int:
        return self.nx * self.ny


def _free_window(k: Kernel, starts, n: int) -> _Window:
    xs = [v.x1 for v in starts]
    ys = [v.x2 for v in starts]
    vr = _vertical_reach(n)
    ylo, yhi = min(ys) - vr, max(ys) + vr
    left, right = _horizontal_extent(k, ylo, yhi, n)
    x0 = min(xs) - left
    nx = max(xs) + right - x0 + 1
    eps = k.orientation.rows(ylo, yhi)
    return _Window(x0, ylo, nx, yhi - ylo + 1, -2, eps)


def _half_window(k: Kernel, start: Vertex, n: int) -> _Window:
    """Window for the walk killed on row 0, inside the half-plane of ``start``."""
    vr = _vertical_reach(n)
    if start.x2 > 0:
        ylo, yhi = 1, start.x2 + vr
        axis_j = -1
    else:
        ylo, yhi = start.x2 - vr, -1
        axis_j = yhi - ylo + 1
    left, right = _horizontal_extent(k, ylo, yhi, n)
    eps = k.orientation.rows(ylo, yhi)
    return _Window(start.x1 - left, ylo, left + right + 1, yhi - ylo + 1, axis_j, eps)


def _run_window(win: _Window, starts: Mapping[Vertex, float], n: int, discount: float,
                track: bool, prune_tol: float, max_cells: int):
    """Push ``starts`` through ``n`` steps on ``win``.

    Returns ``(alive_array, acc_array_or_None, hits, lost)``.
    """
    if win.cells() > max_cells:
        raise ResourceLimitError(
            f"window of {win.nx} x {win.ny} cells exceeds max_cells={max_cells}"
        )
    cur = np.zeros((win.nx, win.ny))
    nxt = np.zeros_like(cur)
    acc = np.zeros_like(cur) if track else np.zeros((1, 1))
    hits = np.zeros(win.nx)
    ii, jj = [], []
    for v, w in starts.items():
        i, j = v.x1 - win.x0, v.x2 - win.y0
        cur[i, j] += float(w)
        ii.append(i)
        jj.append(j)
    box = np.array([min(ii), max(ii), min(jj), max(jj)], dtype=np.int64)
    lost, cur = _kernels.sweep(cur, nxt, acc, hits, win.eps, win.axis_j, discount, n, box,
                               prune_tol, track)
    return cur, (acc if track else None), hits, float(lost)


def _dict_from_array(x0: int, y0: int, a: np.ndarray) -> dict[Vertex, float]:
    ii, jj = np.nonzero(a)
    return {Vertex(x0 + int(i), y0 + int(j)): float(a[i, j]) for i, j in zip(ii, jj)}


# ------------------------------------------------------------------- evolve


def evolve(k: Kernel, d, n: int, *, mode: str = "auto", max_support: int = DEFAULT_MAX_SUPPORT,
           max_cells: int = DEFAULT_MAX_CELLS, prune_tol: float = 0.0) -> SparseDistribution:
    """Law of the walk after ``n`` steps started from ``d``.

    ``d`` is a :class:`SparseDistribution` or a single vertex.  Exact mode
    preserves mass exactly; float mode reports any window loss in
    ``deficit``.
    """
    n = _check_horizon(n)
    if not isinstance(d, SparseDistribution):
        d = SparseDistribution.point(d)
    mode = _resolve_mode(mode, n)
    if mode == "exact":
        mass = {v: Fraction(w) for v, w in d.weights.items()}
        one = Fraction(1)
        for _ in range(n):
            mass, _ = _exact_step(k, mass, one, kill_axis=False)
            _cap_support(mass, max_support)
        return SparseDistribution(mass, exact=True, deficit=Fraction(d.deficit))
    if not d.weights:
        return SparseDistribution({}, exact=False, deficit=float(d.deficit))
    win = _free_window(k, list(d.weights), n)
    alive, _, _, lost = _run_window(win, d.weights, n, 1.0, False, prune_tol, max_cells)
    return SparseDistribution(_dict_from_array(win.x0, win.y0, alive), exact=False,
                              deficit=float(d.deficit) + lost)


# ----------------------------------------------------------- Green sums


def green_field(k: Kernel, x, horizon: int, *, mode: str = "auto", discount=1,
                max_support: int = DEFAULT_MAX_SUPPORT, max_cells: int = DEFAULT_MAX_CELLS,
                prune_tol: float = 0.0):
    """``y -> sum_{n=0}^{N} discount**n P^n(x, y)`` for every ``y`` at once.

    Returns a mapping (dict in exact mode, :class:`LatticeMeasure` in float
    mode) and the mass lost from the float window, which bounds the
    missing contribution per step.
    """
    x = as_vertex(x)
    horizon = _check_horizon(horizon)
    mode = _resolve_mode(mode, horizon)
    if mode == "exact":
        s = Fraction(discount)
        mass = {x: Fraction(1)}
        total: dict[Vertex, Fraction] = {}
        for n in range(horizon + 1):
            for v, w in mass.items():
                total[v] = total.get(v, Fraction(0)) + w
            if n < horizon:
                mass, _ = _exact_step(k, mass, s, kill_axis=False)
                _cap_support(mass, max_support)
        return VertexDict(sorted(total.items())), Fraction(0)
    win = _free_window(k, [x], horizon + 1)
    _, acc, _, lost = _run_window(win, {x: 1.0}, horizon + 1, float(discount), True, prune_tol,
                                  max_cells)
    return LatticeMeasure([(win.x0, win.y0, acc)]), lost


def truncated_green(k: Kernel, x, y, horizon: int, *, mode: str = "auto", discount=1,
                    max_support: int = DEFAULT_MAX_SUPPORT,
                    max_cells: int = DEFAULT_MAX_CELLS) -> Weight:
    """``sum_{n=0}^{N} discount**n P^n(x, y)``, a lower bound on the Green function."""
    x, y = as_vertex(x), as_vertex(y)
    horizon = _check_horizon(horizon)
    mode = _resolve_mode(mode, horizon)
    if abs(x.x1 - y.x1) + abs(x.x2 - y.x2) > horizon:
        return Fraction(0) if mode == "exact" else 0.0
    if mode == "exact":
        s = Fraction(discount)
        mass = {x: Fraction(1)}
        total = Fraction(0)
        for n in range(horizon + 1):
            total += mass.get(y, Fraction(0))
            if n < horizon:
                mass, _ = _exact_step(k, mass, s, kill_axis=False)
                # vertices too far from y cannot come back in time
                left = horizon - n - 1
                mass = {v: w for v, w in mass.items()
                        if abs(v.x1 - y.x1) + abs(v.x2 - y.x2) <= left}
                _cap_support(mass, max_support)
        return total
    fieldmap, _ = green_field(k, x, horizon, mode="float", discount=discount, max_cells=max_cells)
    return float(fieldmap.get(y, 0.0))


# ------------------------------------------------------------- first hit


@dataclass(frozen=True)
class FirstHitReport:
    """Truncated law of the first arrival on the axis after time 0.

    ``nu[z]`` is the probability of arriving at ``(z, 0)`` within the
    horizon, ``local_time[y]`` the expected number of visits to ``y`` at
    times ``0 <= n < min(first arrival, horizon)`` and ``escaped_mass`` the
    probability that no arrival happened by the horizon.  In float mode
    ``deficit`` is the part of ``escaped_mass`` that was lost from the
    window or pruned rather than still in flight.  ``in_flight`` is the
    law of the surviving walk at the horizon; it is kept only when local
    times are tracked.
    """

    nu: Mapping[int, Weight]
    local_time: Mapping[Vertex, Weight]
    escaped_mass: Weight
    horizon: int
    start: Vertex
    exact: bool
    deficit: Weight = 0
    nu_by_time: tuple = field(default=(), repr=False)
    in_flight: Mapping[Vertex, Weight] | None = field(default=None, repr=False)

    def nu_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        z = np.fromiter(self.nu.keys(), dtype=np.int64, count=len(self.nu))
        w = np.fromiter((float(v) for v in self.nu.values()), dtype=float, count=len(self.nu))
        return z, w

    @property
    def hit_mass(self) -> Weight:
        if self.exact:
            return sum(self.nu.values(), Fraction(0))
        return math.fsum(self.nu.values())


def _first_hit_exact(k: Kernel, x: Vertex, horizon: int, track: bool, max_support: int):
    mass = {x: Fraction(1)}
    one = Fraction(1)
    nu: dict[int, Fraction] = {}
    by_time = []
    local: dict[Vertex, Fraction] = {}
    for _ in range(horizon):
        if track:
            for v, w in mass.items():
                local[v] = local.get(v, Fraction(0)) + w
        mass, hits = _exact_step(k, mass, one, kill_axis=True)
        _cap_support(mass, max_support)
        by_time.append(dict(sorted(hits.items())))
        for z, w in hits.items():
            nu[z] = nu.get(z, Fraction(0)) + w
    escaped = sum(mass.values(), Fraction(0))
    return FirstHitReport(
        nu=dict(sorted(nu.items())),
        local_time=VertexDict(sorted(local.items())),
        escaped_mass=escaped,
        horizon=horizon,
        start=x,
        exact=True,
        deficit=Fraction(0),
        nu_by_time=tuple(by_time),
        in_flight=VertexDict(sorted(mass.items())) if track else None,
    )


def _half_run(k, start: Vertex, weight: float, n: int, track: bool, prune_tol, max_cells):
    win = _half_window(k, start, n)
    alive, acc, hits, lost = _run_window(win, {start: weight}, n, 1.0, track, prune_tol, max_cells)
    return win, alive, acc, hits, lost


def _first_hit_float(k: Kernel, x: Vertex, horizon: int, track: bool, prune_tol: float,
                     max_cells: int):
    nu: dict[int, float] = {}
    blocks, flight = [], []
    points, flight_points = {}, {}
    alive = lost = 0.0

    def add_hits(win, hits, flip):
        idx = np.nonzero(hits)[0]
        for i in idx.tolist():
            z = win.x0 + i
            if flip:
                z = 2 * x.x1 - z
            nu[z] = nu.get(z, 0.0) + float(hits[i])

    if not x.on_axis():
        win, cur, acc, hits, lost = _half_run(k, x, 1.0, horizon, track, prune_tol, max_cells)
        alive = float(cur.sum())
        add_hits(win, hits, False)
        if track:
            blocks.append((win.x0, win.y0, acc))
            flight.append((win.x0, win.y0, cur))
    else:
        if track:
            points[x] = 1.0
        if horizon >= 1:
            up, down = x.shift(0, 1), x.shift(0, -1)
            p_up = float(k.transition_prob(x, up))
            p_down = float(k.transition_prob(x, down))
            # the sign rule is odd under point reflection through the start,
            # so the lower half is the mirror image of the upper half
            mirror = isinstance(k.orientation, SignRule) and p_up == p_down
            win, cur, acc, hits, l_ = _half_run(k, up, p_up, horizon - 1, track, prune_tol,
                                                max_cells)
            alive, lost = alive + float(cur.sum()), lost + l_
            add_hits(win, hits, False)
            if track:
                blocks.append((win.x0, win.y0, acc))
                flight.append((win.x0, win.y0, cur))
            if mirror:
                alive, lost = 2 * alive, 2 * lost
                add_hits(win, hits, True)
                if track:
                    mx0 = 2 * x.x1 - (win.x0 + win.nx - 1)
                    my0 = -(win.y0 + win.ny - 1)
                    blocks.append((mx0, my0, acc[::-1, ::-1]))
                    flight.append((mx0, my0, cur[::-1, ::-1]))
            else:
                win, cur, acc, hits, l_ = _half_run(k, down, p_down, horizon - 1, track, prune_tol,
                                                    max_cells)
                alive, lost = alive + float(cur.sum()), lost + l_
                add_hits(win, hits, False)
                if track:
                    blocks.append((win.x0, win.y0, acc))
                    flight.append((win.x0, win.y0, cur))
        else:
            alive = 1.0
            flight_points = {x: 1.0}
    return FirstHitReport(
        nu=dict(sorted(nu.items())),
        local_time=LatticeMeasure(blocks, points),
        escaped_mass=alive + lost,
        horizon=horizon,
        start=x,
        exact=False,
        deficit=lost,
        in_flight=LatticeMeasure(flight, flight_points) if track else None,
    )


def first_hit_axis(k: Kernel, x, horizon: int, *, mode: str = "auto",
                   track_local_time: bool = True, prune_tol: float = DEFAULT_PRUNE_TOL,
                   max_support: int = DEFAULT_MAX_SUPPORT,
                   max_cells: int = DEFAULT_MAX_CELLS) -> FirstHitReport:
    """Evolve the walk killed on arrival at row 0 (at times >= 1) for ``horizon`` steps.

    Float mode prunes window edges whose largest cell is below
    ``prune_tol``; the pruned mass is part of ``escaped_mass``, so
    ``sum(nu) + escaped_mass == 1`` up to rounding and enclosures stay
    valid.
    """
    x = as_vertex(x)
    horizon = _check_horizon(horizon, 1)
    mode = _resolve_mode(mode, horizon)
    if mode == "exact":
        return _first_hit_exact(k, x, horizon, track_local_time, max_support)
    return _first_hit_float(k, x, horizon, track_local_time, prune_tol, max_cells)


def char_of_first_hit(report: FirstHitReport, t):
    """Enclosure ``(centre, half_width)`` of ``E cos(t (X - x1))`` at the first axis arrival.

    The true value lies in ``centre +- half_width`` where the half-width is
    the escaped mass.  ``t`` may be a scalar or an array; ``centre`` then
    has the same shape.  The imaginary part must vanish for an axis start
    under a point-symmetric orientation; a nonzero one raises.
    """
    if not report.start.on_axis():
        raise ValueError("characteristic function is defined for starts on the axis")
    z, w = report.nu_arrays()
    d = (z - report.start.x1).astype(float)
    order = np.argsort(np.abs(d), kind="stable")
    d, w = d[order], w[order]
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    centre = np.empty(ts.shape)
    for idx, tk in np.ndenumerate(ts):
        re = math.fsum(w * np.cos(tk * d))
        im = math.fsum(w * np.sin(tk * d))
        if abs(im) > 1e-9 * max(1.0, float(w.sum())):
            raise ArithmeticError(f"imaginary part {im:.3e} does not vanish; law is not symmetric")
        centre[idx] = re
    if np.ndim(t) == 0:
        return float(centre[0]), float(report.escaped_mass)
    return centre, float(report.escaped_mass)


def decompose_at_first_hit(k: Kernel, x, y, horizon: int) -> Fraction:
    """Right-hand side of the split of ``sum_{n<=N} P^n(x, y)`` at the first axis arrival.

    Exact arithmetic: visits before the arrival plus, for every arrival
    time ``m`` and abscissa ``z``, the arrival mass times the truncated
    Green sum from ``(z, 0)`` with the remaining ``N - m`` steps.
    """
    x, y = as_vertex(x), as_vertex(y)
    horizon = _check_horizon(horizon, 1)
    # one extra step so the local time covers times 0..N inclusive
    rep = _first_hit_exact(k, x, horizon + 1, True, DEFAULT_MAX_SUPPORT)
    total = rep.local_time.get(y, Fraction(0))
    for m, hits in enumerate(rep.nu_by_time[:horizon], start=1):
        for z, w in hits.items():
            total += w * truncated_green(k, Vertex(z, 0), y, horizon - m, mode="exact")
    return total


__all__ = [
    "EXACT_AUTO_LIMIT",
    "FirstHitReport",
    "LatticeMeasure",
    "ResourceLimitError",
    "SparseDistribution",
    "VertexDict",
    "char_of_first_hit",
    "decompose_at_first_hit",
    "evolve",
    "first_hit_axis",
    "green_field",
    "truncated_green",
]

