"""Characteristic functions and Fourier-integral Green functions.

Notation: ``r(t) = 1 / (3 - 2 e^{it})``, ``chi(t) = 2 / (3 - e^{it})`` and
``g(x) = (1 - sqrt(1 - x^2)) / x``.  Two candidate characteristic functions
of the axis-to-axis displacement are provided:

``PAPER``      ``phi(t) = Re[g(r(t)) / r(t)]``
``EXCURSION``  ``phi(t) = Re[g(chi(t))]``

Only one of them is the law of the walk; :func:`arbitrate` decides by
comparing both with the certified enclosure computed from the killed
evolution in :mod:`orlat.oracle`.  The excursion form wins, and it is the
default everywhere.

All Green functions are written as

    G = (1/pi) * int_0^pi Re[exp(-i t m) A(t)] dt

with ``m`` the horizontal offset and ``A`` a transform that depends on the
rows involved.  The optional ``s`` in ``(0, 1]`` is the generating-function
variable: with ``s < 1`` the result is ``sum_n s**n P^n(x, y)``, which is
what the exact finite-horizon oracle can check to machine precision.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .lattice import Vertex, as_vertex
from .quadrature import DEFAULT_QUAD, QuadratureSpec, QuadResult, adaptive_panels, panel_rules, side_panels

SMALL_T = 1e-12
ROW_VISIT_FACTOR = 1.5  # mean number of time steps per vertical visit off the axis


class PhiVariant(str, enum.Enum):
    PAPER = "paper"
    EXCURSION = "excursion"


DEFAULT_VARIANT = PhiVariant.EXCURSION


def as_variant(v) -> PhiVariant:
    if isinstance(v, PhiVariant):
        return v
    if v is None:
        return DEFAULT_VARIANT
    key = str(v).lower()
    if key == "auto":
        return arbitrate().winner
    aliases = {"paperform": "paper", "excursionform": "excursion"}
    return PhiVariant(aliases.get(key, key))


@dataclass(frozen=True)
class GreenValue:
    value: float
    error: float
    route: str


# ------------------------------------------------------------ building blocks


def r_of(t):
    return 1.0 / (3.0 - 2.0 * np.exp(1j * np.asarray(t, dtype=float)))


def chi_of(t, s: float = 1.0):
    return 2.0 * s / (3.0 - s * np.exp(1j * np.asarray(t, dtype=float)))


def _one_minus_e(t):
    """``1 - e^{it}`` without cancellation near 0."""
    return 2.0 * np.sin(0.5 * t) ** 2 - 1j * np.sin(t)


def _g_from_complement(u):
    """``1 - g(x)`` given ``u = 1 - x`` (accurate when ``x`` is near 1)."""
    w = np.sqrt(u * (2.0 - u))
    return (u + w) / (1.0 + w)


def g_of(x):
    """``g(x) = x / (1 + sqrt(1 - x^2))``; principal branch, removable at 0."""
    x = np.asarray(x)
    real_in = not np.iscomplexobj(x) and np.all(np.abs(x) <= 1)
    out = x / (1.0 + np.sqrt(np.asarray(1.0 - x * x, dtype=complex)))
    if real_in:
        out = out.real
    return out[()] if out.ndim == 0 else out


def _chi_complement(t, s):
    """``1 - chi_s(t)`` computed stably."""
    return (3.0 * (1.0 - s) + s * _one_minus_e(t)) / (3.0 - s * np.exp(1j * t))


_PHI_SHIFT = contextvars.ContextVar("phi_shift", default=0.0)


@contextlib.contextmanager
def phi_shift(delta: float):
    """Add ``delta`` to every evaluation of phi inside the block.

    Fault injection for the verification suites; never used otherwise.
    """
    token = _PHI_SHIFT.set(float(delta))
    try:
        yield
    finally:
        _PHI_SHIFT.reset(token)


@dataclass
class _Spectrum:
    """Quantities shared by every transform at a set of nodes."""

    t: np.ndarray
    s: float
    variant: PhiVariant

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        self.t = t
        if self.variant is PhiVariant.EXCURSION:
            u = _chi_complement(t, self.s)
            self.u = u
            self.x = 1.0 - u
            self.one_minus_g = _g_from_complement(u)
            self.gval = 1.0 - self.one_minus_g
            omp = (1.0 - self.s) + self.s * self.one_minus_g.real
        else:
            if self.s != 1.0:
                raise ValueError("the paper form has no generating-function extension")
            u = 2.0 * _one_minus_e(t) / (3.0 - 2.0 * np.exp(1j * t))
            self.u = u
            self.x = 1.0 - u
            self.one_minus_g = _g_from_complement(u)
            self.gval = 1.0 - self.one_minus_g
            w = np.sqrt(u * (2.0 - u))
            omp = (w / (1.0 + w)).real
        if self.s == 1.0:
            tiny = np.abs(t) < SMALL_T
            if np.any(tiny):
                omp = np.where(tiny, kappa(self.variant) * np.sqrt(np.abs(t)), omp)
        self.one_minus_phi = omp - _PHI_SHIFT.get()

    def gpow(self, n: int):
        """``g(x(t)) ** n`` for ``n >= 0``."""
        if n == 0:
            return np.ones_like(self.gval)
        if n <= 10_000:
            return _ipow(self.gval, n)
        return np.exp(n * np.log1p(-self.one_minus_g))


def _ipow(z, n: int):
    result = np.ones_like(z)
    base = z.copy()
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def phi(t, variant=DEFAULT_VARIANT, s: float = 1.0):
    """Candidate characteristic function of the axis-to-axis displacement."""
    sp = _Spectrum(np.atleast_1d(np.asarray(t, dtype=float)), s, as_variant(variant))
    out = 1.0 - sp.one_minus_phi
    return out[0] if np.ndim(t) == 0 else out


def one_minus_phi(t, variant=DEFAULT_VARIANT, s: float = 1.0):
    sp = _Spectrum(np.atleast_1d(np.asarray(t, dtype=float)), s, as_variant(variant))
    out = sp.one_minus_phi
    return out[0] if np.ndim(t) == 0 else out


@lru_cache(maxsize=None)
def kappa(variant: PhiVariant = DEFAULT_VARIANT) -> float:
    """Constant in ``1 - phi(t) ~ kappa sqrt|t|``, read off at ``t = 1e-10``."""
    t = np.array([1e-10])
    if variant is PhiVariant.EXCURSION:
        omp = _g_from_complement(_chi_complement(t, 1.0)).real
    else:
        u = 2.0 * _one_minus_e(t) / (3.0 - 2.0 * np.exp(1j * t))
        w = np.sqrt(u * (2.0 - u))
        omp = (w / (1.0 + w)).real
    return float(omp[0] / np.sqrt(t[0]))


@dataclass(frozen=True)
class PowerFit:
    slope: float
    constant: float
    residual: float


def fit_small_t(variant=DEFAULT_VARIANT, t_lo: float = 1e-6, t_hi: float = 1e-3, n: int = 64) -> PowerFit:
    """Log-log least squares of ``1 - phi(t)`` against ``t`` on ``[t_lo, t_hi]``."""
    t = np.geomspace(t_lo, t_hi, n)
    y = one_minus_phi(t, variant)
    if np.any(y <= 0):
        return PowerFit(math.nan, math.nan, math.inf)
    A = np.vstack([np.log(t), np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    resid = float(np.sqrt(res[0] / n)) if res.size else 0.0
    return PowerFit(float(coef[0]), float(math.exp(coef[1])), resid)


# ------------------------------------------------------------ transforms


def axis_transform(sp: _Spectrum, h: int):
    """Transform for a start on the axis and a target on row ``h``."""
    if sp.variant is PhiVariant.PAPER:
        return np.conj(sp.gpow(abs(h))) / sp.one_minus_phi
    if h == 0:
        row = np.ones_like(sp.gval)
    else:
        row = ROW_VISIT_FACTOR * sp.gpow(abs(h))
        if h < 0:
            row = np.conj(row)
    return row / sp.one_minus_phi


def offaxis_transform(sp: _Spectrum, b: int, h: int):
    """Transform for a start on row ``b > 0`` and a target on row ``h``.

    Sum of the visits made before the first return to the axis and of the
    axis-started Green function weighted by the law of the landing point.
    """
    if sp.variant is not PhiVariant.EXCURSION:
        raise ValueError("off-axis starts are only available for the excursion form")
    if b <= 0:
        raise ValueError("offaxis_transform expects a start strictly above the axis")
    out = sp.gpow(b) * axis_transform(sp, h)
    if h > 0:
        root = np.sqrt(sp.u * (2.0 - sp.u))
        killed = (sp.gpow(abs(b - h)) - sp.gpow(b + h)) / root
        out = out + (ROW_VISIT_FACTOR / sp.s) * sp.x * killed
    return out


def _transform_fn(x: Vertex, h: int, variant: PhiVariant, s: float):
    b = x.x2
    if b == 0:
        return lambda t: axis_transform(_Spectrum(t, s, variant), h)
    return lambda t: offaxis_transform(_Spectrum(t, s, variant), b, h)


# ------------------------------------------------------------ integration


def _cutoff(A_fn, tol: float, n: int = 4096):
    """Upper integration limit beyond which ``|A|`` is negligible, and the dropped bound."""
    grid = math.pi * np.linspace(0.0, 1.0, n + 1)[1:] ** 2
    env = np.abs(A_fn(grid))
    above = np.nonzero(env > tol)[0]
    if above.size == 0:
        k = 0
    else:
        k = int(above[-1]) + 1
    if k >= n:
        return math.pi, 0.0
    upper = float(grid[k])
    tail = float(env[k:].max()) * (math.pi - upper) / math.pi
    return upper, tail


def _integrate(A_fn, m: int, q: QuadratureSpec, damped: bool) -> QuadResult:
    upper, tail = (math.pi, 0.0)
    if damped:
        upper, tail = _cutoff(A_fn, 1e-3 * q.abs_tol)

    def f(t):
        return (np.exp(-1j * m * t) * A_fn(t)).real / math.pi

    value, error, sp, tp = side_panels(f, q, upper=upper, freq=float(abs(m)))
    return QuadResult(float(value), float(error) + tail, sp[0].size + (0 if tp[0] is None else tp[0].size))


def _integrate_row(A_fn, m0: int, count: int, q: QuadratureSpec, damped: bool):
    """Values for offsets ``m0 .. m0+count-1`` sharing one set of nodes."""
    if count == 1:
        res = _integrate(A_fn, m0, q, damped)
        return np.array([res.value]), np.array([res.error])
    upper, tail = (math.pi, 0.0)
    if damped:
        upper, tail = _cutoff(A_fn, 1e-3 * q.abs_tol)
    probe = np.unique(np.array([m0, m0 + count // 2, m0 + count - 1]))
    fmax = float(np.abs(probe).max())

    def f(t):
        return (np.exp(-1j * np.outer(t, probe)) * A_fn(t)[:, None]).real / math.pi

    _, probe_err, sp, tp = side_panels(f, q, upper=upper, freq=fmax)
    t, w_hi, w_lo = panel_rules(sp, tp if tp[0] is not None else (None, None))
    A = A_fn(t) / math.pi
    hi = _kernels.nudft_real(w_hi * A, t, m0, count)
    lo = _kernels.nudft_real(w_lo * A, t, m0, count)
    return hi, np.abs(hi - lo) + probe_err + tail


def green_from_axis(z, y, variant=DEFAULT_VARIANT, q: QuadratureSpec = DEFAULT_QUAD, s: float = 1.0) -> GreenValue:
    """Green function from an axis point ``z`` to any target ``y``."""
    z, y = as_vertex(z), as_vertex(y)
    if z.x2 != 0:
        raise ValueError(f"start {z} is not on the axis")
    variant = as_variant(variant)
    A_fn = _transform_fn(z, y.x2, variant, s)
    res = _integrate(A_fn, y.x1 - z.x1, q, damped=y.x2 != 0 or s < 1.0)
    return GreenValue(res.value, res.error, "spectral")


def green_induced(v: int, variant=DEFAULT_VARIANT, q: QuadratureSpec = DEFAULT_QUAD, s: float = 1.0) -> GreenValue:
    """Green function of the chain observed on the axis, ``G0(0, v)``."""
    return green_from_axis(Vertex(0, 0), Vertex(int(v), 0), variant, q, s)


def green_offaxis(x, y, variant=DEFAULT_VARIANT, q: QuadratureSpec = DEFAULT_QUAD, s: float = 1.0) -> GreenValue:
    """Green function between arbitrary vertices (excursion form only).

    Rows below the axis are handled through the point reflection through the
    origin, under which the sign-rule lattice is invariant.
    """
    x, y = as_vertex(x), as_vertex(y)
    if x.x2 == 0:
        return green_from_axis(x, y, variant, q, s)
    if x.x2 < 0:
        x, y = x.reflect(), y.reflect()
    variant = as_variant(variant)
    A_fn = _transform_fn(x, y.x2, variant, s)
    res = _integrate(A_fn, y.x1 - x.x1, q, damped=True)
    return GreenValue(res.value, res.error, "spectral")


def green_row(b: int, h: int, m0: int, count: int, variant=DEFAULT_VARIANT,
              q: QuadratureSpec = DEFAULT_QUAD, s: float = 1.0):
    """``G((0, b), (m, h))`` for ``m = m0 .. m0+count-1``; returns ``(values, errors)``."""
    variant = as_variant(variant)
    if b < 0:
        vals, errs = green_row(-b, -h, -(m0 + count - 1), count, variant, q, s)
        return vals[::-1].copy(), errs[::-1].copy()
    A_fn = _transform_fn(Vertex(0, b), h, variant, s)
    return _integrate_row(A_fn, m0, count, q, damped=(h != 0 or b != 0 or s < 1.0))


# ------------------------------------------------------------ arbitration


@dataclass(frozen=True)
class Arbitration:
    winner: PhiVariant
    horizon: int
    escaped_mass: float
    t: np.ndarray
    oracle_low: np.ndarray
    oracle_high: np.ndarray
    paper: np.ndarray
    excursion: np.ndarray

    @property
    def paper_inside(self):
        return (self.oracle_low <= self.paper) & (self.paper <= self.oracle_high)

    @property
    def excursion_inside(self):
        return (self.oracle_low <= self.excursion) & (self.excursion <= self.oracle_high)


@lru_cache(maxsize=4)
def arbitrate(horizon: int = 2**14, n_grid: int = 16) -> Arbitration:
    """Decide which candidate lies inside the oracle enclosure on ``{k pi / n_grid}``.

    Raises ``RuntimeError`` when the enclosure does not separate them.
    """
    from .lattice import DEFAULT_KERNEL
    from .oracle import char_of_first_hit, first_hit_axis

    report = first_hit_axis(DEFAULT_KERNEL, Vertex(0, 0), horizon, mode="float", track_local_time=False)
    t = np.pi * np.arange(1, n_grid + 1) / n_grid
    centre, width = char_of_first_hit(report, t)
    lo, hi = centre - width, centre + width
    paper = phi(t, PhiVariant.PAPER)
    exc = phi(t, PhiVariant.EXCURSION)
    arb = Arbitration(PhiVariant.EXCURSION, horizon, float(width), t, lo, hi, paper, exc)
    p_in, e_in = arb.paper_inside, arb.excursion_inside
    if np.all(e_in) and not np.any(p_in):
        return arb
    if np.all(p_in) and not np.any(e_in):
        return Arbitration(PhiVariant.PAPER, horizon, float(width), t, lo, hi, paper, exc)
    raise RuntimeError("oracle enclosure does not single out one candidate; raise the horizon")
