"""Martin kernels, the split of the Green function at the first axis visit and
directional asymptotics of the Green function.

The base point is the origin: ``K(x, y) = G(x, y) / G(0, y)``.

For a start ``x`` off the axis the Green function splits at the first visit
to the axis::

    G(x, y) = E^x[visits to y before the axis] + sum_z nu_x(z) G((z, 0), y)

:func:`green_general` evaluates the right-hand side with the finite-horizon
oracle for the first two ingredients and the Fourier integral for the last.
On the event that the axis is not reached within the horizon, the walk can
add at most ``G(y, y)`` further visits to ``y``, so ``escaped_mass * G(y, y)``
bounds everything the truncation leaves out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .lattice import DEFAULT_KERNEL, Vertex, as_vertex
from .oracle import first_hit_axis
from .quadrature import DEFAULT_QUAD, QuadratureSpec
from .spectral import (
    DEFAULT_VARIANT,
    GreenValue,
    as_variant,
    green_from_axis,
    green_induced,
    green_offaxis,
    green_row,
)

DEFAULT_HORIZON = 2**14

# Before returning to the axis the walk can come back to its current cell
# only through vertical excursions free of horizontal steps; each side
# contributes at most (3 - sqrt 5) / 6, so revisits of one cell number at
# most 1 / (1 - (3 - sqrt 5) / 3) = 3 / sqrt 5 in expectation.
KILLED_DIAGONAL_BOUND = 3.0 / math.sqrt(5.0)

# ------------------------------------------------------------ sequences


@dataclass(frozen=True)
class DirectionalSequence:
    """Targets running off to infinity in a prescribed direction.

    ``lam`` is the limit of ``y1 / y2**2``; ``math.inf`` and ``-math.inf``
    stand for sequences whose ratio diverges.
    """

    lam: float
    targets: tuple[Vertex, ...]

    def __post_init__(self):
        ts = tuple(as_vertex(v) for v in self.targets)
        norms = [math.hypot(v.x1, v.x2) for v in ts]
        if any(b <= a for a, b in zip(norms, norms[1:])):
            raise ValueError("targets must be strictly increasing in norm")
        object.__setattr__(self, "targets", ts)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lam)

    @classmethod
    def parabolic(cls, lam: float, ks: Sequence[int]) -> "DirectionalSequence":
        """``y_k = (round(lam k**2), k)``."""
        return cls(float(lam), tuple(Vertex(int(round(lam * k * k)), int(k)) for k in ks))

    @classmethod
    def horizontal(cls, sign: int, ks: Sequence[int], height: int = 0) -> "DirectionalSequence":
        """``y_k = (sign k, height)``."""
        if sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        return cls(sign * math.inf, tuple(Vertex(sign * int(k), height) for k in ks))

    @classmethod
    def cubic(cls, sign: int, ks: Sequence[int]) -> "DirectionalSequence":
        """``y_k = (sign k**3, k)``."""
        if sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        return cls(sign * math.inf, tuple(Vertex(sign * int(k) ** 3, int(k)) for k in ks))

    def __iter__(self):
        return iter(self.targets)

    def __len__(self):
        return len(self.targets)


def geometric_ks(lo: int, hi: int, n: int) -> list[int]:
    """``n`` integers spread geometrically over ``[lo, hi]`` (duplicates removed)."""
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, n)})


# ------------------------------------------------------------ fits


@dataclass(frozen=True)
class AsymptoticFit:
    exponent: float
    constant: float
    residual: float
    window: tuple[int, int]


def fit_asymptotics(seq: DirectionalSequence, values: Sequence[float], *, base=(0, 0),
                    window: tuple[int, int] | None = None,
                    fixed_exponent: float | None = None) -> AsymptoticFit:
    """Least-squares power law ``values ~ constant * r**exponent`` along ``seq``.

    The regressor ``r`` is ``|y2|`` for a finite direction and ``|y1 - z1|``
    (with ``z = base``) otherwise.  ``window`` selects targets by index
    (inclusive); ``fixed_exponent`` fits the constant only.  ``residual`` is
    the root-mean-square misfit in log space.
    """
    z = as_vertex(base)
    vals = np.asarray(values, dtype=float)
    if vals.shape[0] != len(seq):
        raise ValueError("one value per target is required")
    lo, hi = window if window is not None else (0, len(seq) - 1)
    idx = np.arange(lo, hi + 1)
    if idx.size < 2:
        raise ValueError("need at least two points in the fit window")
    if fixed_exponent is None and len(seq) < 8:
        raise ValueError("need at least 8 points for a free fit")
    if np.any(vals[idx] <= 0):
        raise ValueError("values must be positive")
    if seq.finite:
        r = np.array([abs(seq.targets[i].x2) for i in idx], dtype=float)
    else:
        r = np.array([abs(seq.targets[i].x1 - z.x1) for i in idx], dtype=float)
    if np.any(r <= 0):
        raise ValueError("regressor must be positive")
    lr, lv = np.log(r), np.log(vals[idx])
    if np.ptp(lr) == 0:
        raise ValueError("degenerate fit: regressor has zero variance")
    if fixed_exponent is None:
        slope, icpt = np.polyfit(lr, lv, 1)
    else:
        slope = float(fixed_exponent)
        icpt = float(np.mean(lv - slope * lr))
    resid = float(np.sqrt(np.mean((lv - (icpt + slope * lr)) ** 2)))
    return AsymptoticFit(float(slope), float(math.exp(icpt)), resid, (int(lo), int(hi)))


# ------------------------------------------------------------ kernels


def martin_kernel_induced(u: int, v: int, variant=DEFAULT_VARIANT,
                          q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Martin kernel of the chain on the axis: ``G0(0, v - u) / G0(0, v)``."""
    if u == 0:
        return 1.0
    return green_induced(v - u, variant, q).value / green_induced(v, variant, q).value


@dataclass(frozen=True)
class Decomposition:
    """Ingredients of the split of ``G(x, y)`` at the first axis visit.

    ``value`` is a lower bound and ``value + error`` an upper bound.
    """

    local_time: float
    hitting_part: float
    escaped_mass: float
    diagonal: float
    quad_error: float
    horizon: int

    @property
    def value(self) -> float:
        return self.local_time + self.hitting_part

    @property
    def error(self) -> float:
        return self.escaped_mass * self.diagonal + self.quad_error


@lru_cache(maxsize=64)
def _first_hit(x: Vertex, horizon: int):
    return first_hit_axis(DEFAULT_KERNEL, x, horizon, mode="float", track_local_time=True)


def _hitting_sum(nu_z, nu_w, y: Vertex, variant, q, s: float = 1.0):
    """``sum_z nu(z) G((z, 0), y)`` with its quadrature error."""
    if nu_z.size == 0:
        return 0.0, 0.0
    zmin, zmax = int(nu_z.min()), int(nu_z.max())
    # G((z, 0), y) depends on y1 - z only: one Fourier row covers every z
    m0 = y.x1 - zmax
    vals, errs = green_row(0, y.x2, m0, zmax - zmin + 1, variant, q, s=s)
    pos = y.x1 - nu_z - m0
    return float(math.fsum(nu_w * vals[pos])), float(np.dot(nu_w, errs[pos]))


def decompose(x, y, horizon: int = DEFAULT_HORIZON, variant=DEFAULT_VARIANT,
              q: QuadratureSpec = DEFAULT_QUAD) -> Decomposition:
    """Evaluate both parts of the first-visit split of ``G(x, y)``."""
    x, y = as_vertex(x), as_vertex(y)
    variant = as_variant(variant)
    rep = _first_hit(x, int(horizon))
    z, w = rep.nu_arrays()
    hit, hit_err = _hitting_sum(z, w, y, variant, q)
    diag = green_offaxis(y, y, variant, q)
    return Decomposition(
        local_time=float(rep.local_time.get(y, 0.0)),
        hitting_part=hit,
        escaped_mass=float(rep.escaped_mass),
        diagonal=diag.value + diag.error,
        quad_error=hit_err,
        horizon=int(horizon),
    )


def green_general(x, y, horizon: int = DEFAULT_HORIZON, variant=DEFAULT_VARIANT,
                  q: QuadratureSpec = DEFAULT_QUAD) -> tuple[float, float]:
    """``G(x, y)`` from the first-visit split, with an error bound.

    For ``x`` on the axis this is the Fourier integral itself and the error
    is the quadrature estimate.  Otherwise the value is a lower bound and
    the true Green function lies within ``value + error``.
    """
    x, y = as_vertex(x), as_vertex(y)
    if x.on_axis():
        g = green_from_axis(x, y, variant, q)
        return g.value, g.error
    d = decompose(x, y, horizon, variant, q)
    return d.value, d.error


def martin_kernel(x, y, horizon: int = DEFAULT_HORIZON, variant=DEFAULT_VARIANT,
                  q: QuadratureSpec = DEFAULT_QUAD, *, route: str = "spectral") -> GreenValue:
    """``K(x, y) = G(x, y) / G(0, y)``.

    ``route="spectral"`` uses the closed Fourier form for off-axis starts;
    ``route="decomposition"`` uses :func:`green_general`, whose truncation
    error is propagated into the returned error.
    """
    x, y = as_vertex(x), as_vertex(y)
    base = green_from_axis((0, 0), y, variant, q)
    if x == Vertex(0, 0):
        return GreenValue(1.0, 0.0, route)
    if route == "spectral":
        num = green_offaxis(x, y, variant, q)
        val, err = num.value, num.error
    elif route == "decomposition":
        val, err = green_general(x, y, horizon, variant, q)
    else:
        raise ValueError(f"unknown route {route!r}")
    k = val / base.value
    return GreenValue(k, (err + abs(k) * base.error) / base.value, route)


def split_identity(x, y, horizon: int = DEFAULT_HORIZON, variant=DEFAULT_VARIANT,
                   q: QuadratureSpec = DEFAULT_QUAD) -> tuple[float, float, float]:
    """Both sides of ``K(x, y) = E^x eta(y) / G(0, y) + sum_z nu_x(z) K0(z, y)``.

    Returns ``(left, right, bound)``: the left side from the closed form,
    the right side from the oracle and the Fourier integral, and the
    combined error bound on their difference.
    """
    x, y = as_vertex(x), as_vertex(y)
    left = martin_kernel(x, y, horizon, variant, q, route="spectral")
    base = green_from_axis((0, 0), y, variant, q)
    d = decompose(x, y, horizon, variant, q)
    right = d.local_time / base.value + d.hitting_part / base.value
    bound = left.error + (d.error + right * base.error) / base.value
    return left.value, right, bound


# ------------------------------------------------------------ local times


def _can_reach(y: Vertex, a: np.ndarray, row_sign: int) -> np.ndarray:
    """Mask of in-flight abscissas ``a`` on a half plane that can still visit ``y``.

    Above the axis abscissas only grow, below they only shrink.
    """
    if y.x2 == 0 or row_sign != (1 if y.x2 > 0 else -1):
        return np.zeros(a.shape, dtype=bool)
    return a <= y.x1 if y.x2 > 0 else a >= y.x1


def local_time_bound(report, y) -> float:
    """Upper bound on the visits to ``y`` before the axis that happen after the horizon."""
    y = as_vertex(y)
    if y.on_axis():
        return 0.0
    flight = report.in_flight
    if flight is None:
        return float(report.escaped_mass) * KILLED_DIAGONAL_BOUND
    reach = 0.0
    if hasattr(flight, "blocks"):
        for x0, y0, arr in flight.blocks:
            xs = x0 + np.arange(arr.shape[0])
            ys = y0 + np.arange(arr.shape[1])
            for sign in (1, -1):
                rows = (ys > 0) if sign > 0 else (ys < 0)
                if rows.any():
                    cols = _can_reach(y, xs, sign)
                    reach += float(arr[np.ix_(cols, rows)].sum())
        items = flight.points.items()
    else:
        items = flight.items()
    for v, w in items:
        if v.x2 != 0 and _can_reach(y, np.array([v.x1]), 1 if v.x2 > 0 else -1)[0]:
            reach += float(w)
    return (reach + float(report.deficit)) * KILLED_DIAGONAL_BOUND


@dataclass(frozen=True)
class DecayReport:
    """Pre-hit local times along a sequence and a verdict on their decay.

    ``rows`` are ``(y, value, bound)`` with the true local time in
    ``[value, value + bound]``.  ``scaled`` multiplies by ``|y1|**0.5``
    (or ``|y2|`` when ``scale == "y2"``).  ``verdict`` is ``"decreasing"``
    when every consecutive pair of scaled enclosures is ordered,
    ``"not decreasing"`` when some pair is certainly increasing and
    ``"inconclusive"`` otherwise.
    """

    rows: tuple[tuple[Vertex, float, float], ...]
    scaled: tuple[float, ...]
    verdict: str


def local_time_decay(ys: Sequence, horizon: int = DEFAULT_HORIZON, *,
                     scale: str = "y1") -> DecayReport:
    """Expected visits to each ``y`` before the first axis return from the origin."""
    ys = [as_vertex(v) for v in ys]
    rep = _first_hit(Vertex(0, 0), int(horizon))
    rows, lo, hi = [], [], []
    for y in ys:
        val = float(rep.local_time.get(y, 0.0))
        bound = local_time_bound(rep, y)
        rows.append((y, val, bound))
        f = math.sqrt(abs(y.x1)) if scale == "y1" else float(abs(y.x2))
        lo.append(val * f)
        hi.append((val + bound) * f)
    pairs = list(zip(range(len(ys) - 1), range(1, len(ys))))
    if all(hi[j] < lo[i] for i, j in pairs):
        verdict = "decreasing"
    elif any(lo[j] > hi[i] for i, j in pairs):
        verdict = "not decreasing"
    else:
        verdict = "inconclusive"
    return DecayReport(tuple(rows), tuple(lo), verdict)


__all__ = [
    "AsymptoticFit",
    "DecayReport",
    "Decomposition",
    "DirectionalSequence",
    "decompose",
    "fit_asymptotics",
    "geometric_ks",
    "green_general",
    "local_time_bound",
    "local_time_decay",
    "martin_kernel",
    "martin_kernel_induced",
    "split_identity",
]
