"""Adaptive panel quadrature for integrands with an inverse square root at 0.

Each panel is integrated with 20- and 10-point Gauss-Legendre rules; the
20-point value is kept and the difference is the panel's error estimate.
Panels over budget are bisected until the summed estimate drops below the
tolerance.  Integrands are vectorised callables ``f(t) -> array``; they
may return shape ``(n,)`` or ``(n, k)`` for ``k`` integrands sharing nodes.

On a side ``[0, upper]`` the central panel ``[0, h]`` is integrated in
``s = sqrt(t)``: the Jacobian ``2 s`` cancels a ``|t|**-0.5`` blow-up and
the transformed integrand is smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

_X20, _W20 = np.polynomial.legendre.leggauss(20)
_X10, _W10 = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-9
    singularity_halfwidth: float = 0.1
    max_panels: int = 2**16

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not 0 < self.singularity_halfwidth < math.pi:
            raise ValueError("singularity_halfwidth must lie in (0, pi)")
        if self.max_panels < 4:
            raise ValueError("max_panels must be at least 4")


DEFAULT_QUAD = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Tolerance not reached within the panel budget."""

    def __init__(self, message: str, best, error: float):
        super().__init__(f"{message} (best={best!r}, error={error:.3e})")
        self.best = best
        self.error = error


@dataclass(frozen=True)
class QuadResult:
    value: float | np.ndarray
    error: float
    panels: int


def _panel_values(f, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = np.concatenate(
        [mid[:, None] + half[:, None] * _X20[None, :], mid[:, None] + half[:, None] * _X10[None, :]],
        axis=1,
    )
    vals = np.asarray(f(x.ravel()))
    vals = vals.reshape((a.size, 30) + vals.shape[1:])
    w20 = np.einsum("j,pj...->p...", _W20, vals[:, :20])
    w10 = np.einsum("j,pj...->p...", _W10, vals[:, 20:])
    scale = half.reshape((-1,) + (1,) * (w20.ndim - 1))
    i20 = scale * w20
    err = np.abs(scale * (w20 - w10))
    if err.ndim > 1:
        err = err.reshape(a.size, -1).max(axis=1)
    return i20, err


def adaptive_panels(f: Callable, breaks, tol: float, max_panels: int):
    """Integrate over ``[breaks[0], breaks[-1]]`` starting from the given partition.

    Returns ``(value, error, left_ends, right_ends)`` with the final panels.
    Raises :class:`QuadratureError` when more than ``max_panels`` would be
    needed.
    """
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1].copy(), breaks[1:].copy()
    if a.size > max_panels:
        raise QuadratureError("initial partition exceeds the panel budget", None, math.inf)
    vals, errs = _panel_values(f, a, b)
    while True:
        total = float(errs.sum())
        if total <= tol:
            return vals.sum(axis=0), total, a, b
        bad = errs > tol / (4.0 * a.size)
        n_bad = int(bad.sum())
        if n_bad == 0:
            bad = errs >= errs.max()
            n_bad = int(bad.sum())
        if a.size + n_bad > max_panels:
            raise QuadratureError("panel budget exhausted", vals.sum(axis=0), total)
        good = ~bad
        mid = 0.5 * (a[bad] + b[bad])
        na = np.concatenate([a[bad], mid])
        nb = np.concatenate([mid, b[bad]])
        nvals, nerrs = _panel_values(f, na, nb)
        a = np.concatenate([a[good], na])
        b = np.concatenate([b[good], nb])
        vals = np.concatenate([vals[good], nvals])
        errs = np.concatenate([errs[good], nerrs])


def side_partition(upper: float, halfwidth: float, freq: float = 0.0):
    """Initial breakpoints on ``[0, upper]``: central part in ``s``, outer part in ``t``.

    Panels are no wider than one period of ``cos(freq * t)``.
    """
    h = min(halfwidth, upper)
    period = 2.0 * math.pi / abs(freq) if freq else math.inf
    n_c = max(1, math.ceil(h / min(period, h)))
    s_breaks = np.sqrt(np.linspace(0.0, h, n_c + 1))
    if upper > h:
        n_o = max(4, math.ceil((upper - h) / period)) if freq else 8
        t_breaks = np.linspace(h, upper, n_o + 1)
    else:
        t_breaks = None
    return s_breaks, t_breaks


def side_panels(f: Callable, q: QuadratureSpec, *, upper: float = math.pi, freq: float = 0.0,
                tol: float | None = None):
    """Adaptive integration of a side; also returns the converged panels.

    Returns ``(value, error, s_panels, t_panels)`` where the panel entries
    are ``(left, right)`` array pairs usable with :func:`panel_rules`.
    """
    tol = q.abs_tol if tol is None else tol
    s_breaks, t_breaks = side_partition(upper, q.singularity_halfwidth, freq)

    def central(s):
        return np.moveaxis(2.0 * s * np.moveaxis(np.asarray(f(s * s)), 0, -1), -1, 0)

    v1, e1, sa, sb = adaptive_panels(central, s_breaks, 0.5 * tol, q.max_panels)
    value, error = v1, e1
    t_panels = (None, None)
    if t_breaks is not None:
        v2, e2, ta, tb = adaptive_panels(f, t_breaks, 0.5 * tol, max(4, q.max_panels - sa.size))
        value, error = value + v2, error + e2
        t_panels = (ta, tb)
    return value, error, (sa, sb), t_panels


def side_integral(f: Callable, q: QuadratureSpec, *, upper: float = math.pi, freq: float = 0.0,
                  tol: float | None = None) -> QuadResult:
    """``int_0^upper f(t) dt`` for ``f`` with at worst ``t**-0.5`` behaviour at 0."""
    value, error, sp, tp = side_panels(f, q, upper=upper, freq=freq, tol=tol)
    n = sp[0].size + (0 if tp[0] is None else tp[0].size)
    return QuadResult(value, error, n)


def singular_integral(f: Callable, q: QuadratureSpec = DEFAULT_QUAD, *, freq: float = 0.0,
                      symmetric: bool = False) -> QuadResult:
    """Integrate ``f`` over ``[-pi, pi]``; ``f`` may blow up like ``|t|**-0.5`` at 0.

    ``freq`` hints at the fastest oscillation so that initial panels resolve
    it.  With ``symmetric=True`` the integrand is taken to be even and only
    ``[0, pi]`` is evaluated.
    """
    if symmetric:
        res = side_integral(f, q, freq=freq)
        return QuadResult(2.0 * res.value, 2.0 * res.error, res.panels)
    right = side_integral(f, q, freq=freq, tol=0.5 * q.abs_tol)
    left = side_integral(lambda t: f(-t), q, freq=freq, tol=0.5 * q.abs_tol)
    return QuadResult(right.value + left.value, right.error + left.error, right.panels + left.panels)


def panel_rules(s_panels, t_panels):
    """Nodes and weights (20- and 10-point) in ``t`` for fixed panels of a side.

    ``s_panels`` are ``(left, right)`` arrays in the square-root variable,
    ``t_panels`` in ``t`` itself; the ``s`` weights carry the Jacobian.
    """
    nodes, w_hi, w_lo = [], [], []
    for (a, b), in_s in ((s_panels, True), (t_panels, False)):
        if a is None or a.size == 0:
            continue
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for xs, ws, dst in ((_X20, _W20, w_hi), (_X10, _W10, w_lo)):
            x = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
            w = (half[:, None] * ws[None, :]).ravel()
            if in_s:
                w = w * 2.0 * x
                x = x * x
            nodes.append(x)
            dst.append(w)
    # layout: every node appears once per rule; weights of the other rule are zero
    t = np.concatenate(nodes)
    hi = np.concatenate([np.concatenate([w, np.zeros_like(l)]) for w, l in zip(w_hi, w_lo)])
    lo = np.concatenate([np.concatenate([np.zeros_like(w), l]) for w, l in zip(w_hi, w_lo)])
    return t, hi, lo
