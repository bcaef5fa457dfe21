"""Hot inner loops, each in a compiled and a pure-numpy flavour.

The dispatchers at the bottom pick one according to
:func:`orlat._accel.numba_enabled`; the flavoured functions stay importable
so the benchmark can compare them directly.

Sweep kernels
-------------
A mass array ``cur[i, j]`` lives on a dense window of the lattice; column
``i`` is the abscissa ``x0 + i`` and row ``j`` the ordinate ``y0 + j``.
``eps[j]`` is the orientation of row ``j``.  One sweep pushes mass along
the walk kernel ``n_steps`` times, only touching the active box
``(ilo, ihi, jlo, jhi)``.  Mass stepping onto the virtual row ``axis_j``
is removed and binned by column into ``hits`` (killed walk); mass leaving
the window or falling below ``tol`` on the edge of the active box is
dropped into ``lost``.  ``acc`` accumulates the mass present before each
step, i.e. expected visits at times ``0..n_steps-1``.

Monte Carlo kernels
-------------------
Each draws a chunk of independent samples from its own seeded stream.
Status codes: 0 finished, 1 censored by the step cap, 2 stopped early
because the abscissa already left ``[-bin_limit, bin_limit]``.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit, numba_enabled

DONE, CENSORED, SATURATED = 0, 1, 2

# ---------------------------------------------------------------- sweeps


@njit
def _sweep_numba(cur, nxt, acc, hits, eps, axis_j, discount, n_steps, box, tol, track):
    nx, ny = cur.shape
    ilo, ihi, jlo, jhi = box[0], box[1], box[2], box[3]
    lost = 0.0
    for _ in range(n_steps):
        if ilo > ihi:
            break
        a0 = max(ilo - 1, 0)
        a1 = min(ihi + 1, nx - 1)
        b0 = max(jlo - 1, 0)
        b1 = min(jhi + 1, ny - 1)
        # both arrays are zero outside the active box between steps
        for i in range(ilo, ihi + 1):
            for j in range(jlo, jhi + 1):
                m = cur[i, j]
                if m == 0.0:
                    continue
                if track:
                    acc[i, j] += m
                e = eps[j]
                if e == 0:
                    p = m * discount * 0.5
                else:
                    p = m * discount / 3.0
                # up, down
                for jt in (j + 1, j - 1):
                    if jt == axis_j:
                        hits[i] += p
                    elif jt < 0 or jt >= ny:
                        lost += p
                    else:
                        nxt[i, jt] += p
                if e != 0:
                    it = i + e
                    if it < 0 or it >= nx:
                        lost += p
                    else:
                        nxt[it, j] += p
        ilo, ihi, jlo, jhi = a0, a1, b0, b1
        # trim negligible edges of the active box
        while ilo <= ihi:
            s = 0.0
            mx = 0.0
            for j in range(jlo, jhi + 1):
                v = nxt[ilo, j]
                s += v
                if v > mx:
                    mx = v
            if mx >= tol:
                break
            lost += s
            for j in range(jlo, jhi + 1):
                nxt[ilo, j] = 0.0
            ilo += 1
        while ihi >= ilo:
            s = 0.0
            mx = 0.0
            for j in range(jlo, jhi + 1):
                v = nxt[ihi, j]
                s += v
                if v > mx:
                    mx = v
            if mx >= tol:
                break
            lost += s
            for j in range(jlo, jhi + 1):
                nxt[ihi, j] = 0.0
            ihi -= 1
        while jlo <= jhi and ilo <= ihi:
            s = 0.0
            mx = 0.0
            for i in range(ilo, ihi + 1):
                v = nxt[i, jlo]
                s += v
                if v > mx:
                    mx = v
            if mx >= tol:
                break
            lost += s
            for i in range(ilo, ihi + 1):
                nxt[i, jlo] = 0.0
            jlo += 1
        while jhi >= jlo and ilo <= ihi:
            s = 0.0
            mx = 0.0
            for i in range(ilo, ihi + 1):
                v = nxt[i, jhi]
                s += v
                if v > mx:
                    mx = v
            if mx >= tol:
                break
            lost += s
            for i in range(ilo, ihi + 1):
                nxt[i, jhi] = 0.0
            jhi -= 1
        if jlo > jhi:
            ilo, ihi = 1, 0
        # clear the stale box of cur so the arrays can swap roles
        for i in range(a0, a1 + 1):
            for j in range(b0, b1 + 1):
                cur[i, j] = 0.0
        cur, nxt = nxt, cur
    box[0], box[1], box[2], box[3] = ilo, ihi, jlo, jhi
    return lost, cur


def _sweep_numpy(cur, nxt, acc, hits, eps, axis_j, discount, n_steps, box, tol, track):
    nx, ny = cur.shape
    ilo, ihi, jlo, jhi = (int(v) for v in box)
    lost = 0.0
    pos = eps == 1
    neg = eps == -1
    inv_deg = np.where(eps == 0, 0.5, 1.0 / 3.0)
    for _ in range(n_steps):
        if ilo > ihi:
            break
        a0, a1 = max(ilo - 1, 0), min(ihi + 1, nx - 1)
        b0, b1 = max(jlo - 1, 0), min(jhi + 1, ny - 1)
        sub = cur[ilo : ihi + 1, jlo : jhi + 1]
        if track:
            acc[ilo : ihi + 1, jlo : jhi + 1] += sub
        p = sub * (discount * inv_deg[jlo : jhi + 1])[None, :]
        # up: row j -> j+1
        top = jhi + 1
        if top == axis_j:
            hits[ilo : ihi + 1] += p[:, -1]
            nxt[ilo : ihi + 1, jlo + 1 : jhi + 1] += p[:, :-1]
        elif top >= ny:
            lost += p[:, -1].sum()
            nxt[ilo : ihi + 1, jlo + 1 : jhi + 1] += p[:, :-1]
        else:
            nxt[ilo : ihi + 1, jlo + 1 : top + 1] += p
        # down: row j -> j-1
        bot = jlo - 1
        if bot == axis_j:
            hits[ilo : ihi + 1] += p[:, 0]
            nxt[ilo : ihi + 1, jlo : jhi] += p[:, 1:]
        elif bot < 0:
            lost += p[:, 0].sum()
            nxt[ilo : ihi + 1, jlo : jhi] += p[:, 1:]
        else:
            nxt[ilo : ihi + 1, bot:jhi] += p
        # horizontal
        pr = p * pos[jlo : jhi + 1][None, :]
        pl = p * neg[jlo : jhi + 1][None, :]
        if ihi + 1 >= nx:
            lost += pr[-1].sum()
            nxt[ilo + 1 : ihi + 1, jlo : jhi + 1] += pr[:-1]
        else:
            nxt[ilo + 1 : ihi + 2, jlo : jhi + 1] += pr
        if ilo - 1 < 0:
            lost += pl[0].sum()
            nxt[ilo:ihi, jlo : jhi + 1] += pl[1:]
        else:
            nxt[ilo - 1 : ihi, jlo : jhi + 1] += pl
        ilo, ihi, jlo, jhi = a0, a1, b0, b1
        while ilo <= ihi and nxt[ilo, jlo : jhi + 1].max() < tol:
            lost += nxt[ilo, jlo : jhi + 1].sum()
            nxt[ilo, jlo : jhi + 1] = 0.0
            ilo += 1
        while ihi >= ilo and nxt[ihi, jlo : jhi + 1].max() < tol:
            lost += nxt[ihi, jlo : jhi + 1].sum()
            nxt[ihi, jlo : jhi + 1] = 0.0
            ihi -= 1
        while jlo <= jhi and ilo <= ihi and nxt[ilo : ihi + 1, jlo].max() < tol:
            lost += nxt[ilo : ihi + 1, jlo].sum()
            nxt[ilo : ihi + 1, jlo] = 0.0
            jlo += 1
        while jhi >= jlo and ilo <= ihi and nxt[ilo : ihi + 1, jhi].max() < tol:
            lost += nxt[ilo : ihi + 1, jhi].sum()
            nxt[ilo : ihi + 1, jhi] = 0.0
            jhi -= 1
        if jlo > jhi:
            ilo, ihi = 1, 0
        cur[a0 : a1 + 1, b0 : b1 + 1] = 0.0
        cur, nxt = nxt, cur
    box[:] = (ilo, ihi, jlo, jhi)
    return lost, cur


def sweep(cur, nxt, acc, hits, eps, axis_j, discount, n_steps, box, tol, track):
    """Advance ``cur`` by ``n_steps``; returns ``(lost_mass, current_array)``.

    ``box`` is updated in place.  The returned array is ``cur`` or ``nxt``
    depending on the parity of the number of steps taken.
    """
    fn = _sweep_numba if numba_enabled() else _sweep_numpy
    return fn(cur, nxt, acc, hits, eps, int(axis_j), float(discount), int(n_steps), box,
              float(tol), bool(track))


# ---------------------------------------------------------- orientation lookup


@njit
def _eps_at(y, sign_rule, eps_rows, row_lo, eps_default):
    if sign_rule:
        if y > 0:
            return 1
        if y < 0:
            return -1
        return 0
    k = y - row_lo
    if 0 <= k < eps_rows.shape[0]:
        return eps_rows[k]
    return eps_default


def _eps_vec(y, sign_rule, eps_rows, row_lo, eps_default):
    if sign_rule:
        return np.sign(y).astype(np.int64)
    k = y - row_lo
    inside = (k >= 0) & (k < eps_rows.shape[0])
    out = np.full(y.shape, eps_default, dtype=np.int64)
    out[inside] = eps_rows[k[inside]]
    return out


# ---------------------------------------------------------- single path


@njit
def _walk_numba(x1, x2, uniforms, sign_rule, eps_rows, row_lo, eps_default):
    n = uniforms.shape[0]
    xs = np.empty(n + 1, dtype=np.int64)
    ys = np.empty(n + 1, dtype=np.int64)
    xs[0] = x1
    ys[0] = x2
    for k in range(n):
        e = _eps_at(x2, sign_rule, eps_rows, row_lo, eps_default)
        u = uniforms[k]
        if e == 0:
            x2 += 1 if u < 0.5 else -1
        else:
            c = int(u * 3.0)
            if c == 0:
                x2 += 1
            elif c == 1:
                x2 -= 1
            else:
                x1 += e
        xs[k + 1] = x1
        ys[k + 1] = x2
    return xs, ys


def _walk_python(x1, x2, uniforms, sign_rule, eps_rows, row_lo, eps_default):
    n = uniforms.shape[0]
    xs = np.empty(n + 1, dtype=np.int64)
    ys = np.empty(n + 1, dtype=np.int64)
    xs[0], ys[0] = x1, x2
    e_of = getattr(_eps_at, "py_func", _eps_at)
    for k in range(n):
        e = e_of(x2, sign_rule, eps_rows, row_lo, eps_default)
        u = uniforms[k]
        if e == 0:
            x2 += 1 if u < 0.5 else -1
        else:
            c = min(int(u * 3.0), 2)
            if c == 0:
                x2 += 1
            elif c == 1:
                x2 -= 1
            else:
                x1 += e
        xs[k + 1], ys[k + 1] = x1, x2
    return xs, ys


def walk(x1, x2, uniforms, sign_rule, eps_rows, row_lo, eps_default):
    fn = _walk_numba if numba_enabled() else _walk_python
    return fn(int(x1), int(x2), uniforms, bool(sign_rule), eps_rows, int(row_lo), int(eps_default))


# ---------------------------------------------------------- first axis hit


@njit
def _first_hit_numba(seed, n, x1, x2, cap, bin_limit, sign_rule, eps_rows, row_lo, eps_default):
    np.random.seed(seed)
    out = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    steps = np.zeros(n, dtype=np.int64)
    for s in range(n):
        a = x1
        b = x2
        t = 0
        st = DONE
        while True:
            e = _eps_at(b, sign_rule, eps_rows, row_lo, eps_default)
            u = np.random.random()
            if e == 0:
                b += 1 if u < 0.5 else -1
            else:
                c = int(u * 3.0)
                if c == 0:
                    b += 1
                elif c == 1:
                    b -= 1
                else:
                    a += e
            t += 1
            if b == 0:
                break
            if bin_limit >= 0 and (a > bin_limit or a < -bin_limit):
                # inside a one-signed half plane the abscissa is monotone
                st = SATURATED
                break
            if t >= cap:
                st = CENSORED
                break
        out[s] = a
        status[s] = st
        steps[s] = t
    return out, status, steps


def _first_hit_numpy(seed, n, x1, x2, cap, bin_limit, sign_rule, eps_rows, row_lo, eps_default):
    rng = np.random.default_rng(seed)
    a = np.full(n, x1, dtype=np.int64)
    b = np.full(n, x2, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    active = np.arange(n)
    while active.size:
        e = _eps_vec(b[active], sign_rule, eps_rows, row_lo, eps_default)
        u = rng.random(active.size)
        c = np.where(e == 0, np.where(u < 0.5, 0, 1), np.minimum((u * 3.0).astype(np.int64), 2))
        b[active] += np.where(c == 0, 1, np.where(c == 1, -1, 0))
        a[active] += np.where(c == 2, e, 0)
        steps[active] += 1
        done = b[active] == 0
        sat = ~done & (bin_limit >= 0) & ((a[active] > bin_limit) | (a[active] < -bin_limit))
        cen = ~done & ~sat & (steps[active] >= cap)
        status[active[sat]] = SATURATED
        status[active[cen]] = CENSORED
        active = active[~(done | sat | cen)]
    return a, status, steps


def first_hit(seed, n, x1, x2, cap, bin_limit, sign_rule, eps_rows, row_lo, eps_default):
    """Run ``n`` walks from ``(x1, x2)`` to their first axis visit at time >= 1."""
    fn = _first_hit_numba if numba_enabled() else _first_hit_numpy
    return fn(int(seed), int(n), int(x1), int(x2), int(cap), int(bin_limit), bool(sign_rule),
              eps_rows, int(row_lo), int(eps_default))


# ---------------------------------------------------------- excursion + geometric


@njit
def _geometric_numba(seed, n, q_stop, cap, bin_limit, sign_rule, eps_rows, row_lo, eps_default):
    np.random.seed(seed)
    out = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    lengths = np.zeros(n, dtype=np.int64)
    for s in range(n):
        y = 1 if np.random.random() < 0.5 else -1
        t = 1
        x = 0
        st = DONE
        while y != 0:
            e = _eps_at(y, sign_rule, eps_rows, row_lo, eps_default)
            if e != 0:
                x += e * (np.random.geometric(q_stop) - 1)
            if bin_limit >= 0 and (x > bin_limit or x < -bin_limit):
                st = SATURATED
                break
            y += 1 if np.random.random() < 0.5 else -1
            t += 1
            if y != 0 and t >= cap:
                st = CENSORED
                break
        out[s] = x
        status[s] = st
        lengths[s] = t
    return out, status, lengths


def _geometric_numpy(seed, n, q_stop, cap, bin_limit, sign_rule, eps_rows, row_lo, eps_default):
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int64)
    x = np.zeros(n, dtype=np.int64)
    t = np.ones(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    active = np.arange(n)
    while active.size:
        e = _eps_vec(y[active], sign_rule, eps_rows, row_lo, eps_default)
        x[active] += e * (rng.geometric(q_stop, active.size) - 1)
        sat = (bin_limit >= 0) & ((x[active] > bin_limit) | (x[active] < -bin_limit))
        status[active[sat]] = SATURATED
        active = active[~sat]
        y[active] += np.where(rng.random(active.size) < 0.5, 1, -1)
        t[active] += 1
        back = y[active] == 0
        cen = ~back & (t[active] >= cap)
        status[active[cen]] = CENSORED
        active = active[~(back | cen)]
    return x, status, t


def geometric_excursions(seed, n, q_stop, cap, bin_limit, sign_rule, eps_rows, row_lo, eps_default):
    """Axis-to-axis displacement built from a vertical excursion and geometric runs.

    Every interior visit of the vertical walk adds ``eps(level)`` times a
    geometric count of horizontal steps (failures before a success of
    probability ``q_stop``).  Returns ``(displacement, status, sigma_1)``.
    """
    fn = _geometric_numba if numba_enabled() else _geometric_numpy
    return fn(int(seed), int(n), float(q_stop), int(cap), int(bin_limit), bool(sign_rule),
              eps_rows, int(row_lo), int(eps_default))


# ---------------------------------------------------------- visit counts


@njit
def _visits_numba(seed, n, x1, x2, y1, y2, horizon, sign_rule, eps_rows, row_lo, eps_default):
    np.random.seed(seed)
    counts = np.zeros(n, dtype=np.int64)
    for s in range(n):
        a = x1
        b = x2
        c = 1 if (a == y1 and b == y2) else 0
        for _ in range(horizon):
            e = _eps_at(b, sign_rule, eps_rows, row_lo, eps_default)
            u = np.random.random()
            if e == 0:
                b += 1 if u < 0.5 else -1
            else:
                k = int(u * 3.0)
                if k == 0:
                    b += 1
                elif k == 1:
                    b -= 1
                else:
                    a += e
            if a == y1 and b == y2:
                c += 1
        counts[s] = c
    return counts


def _visits_numpy(seed, n, x1, x2, y1, y2, horizon, sign_rule, eps_rows, row_lo, eps_default):
    rng = np.random.default_rng(seed)
    a = np.full(n, x1, dtype=np.int64)
    b = np.full(n, x2, dtype=np.int64)
    counts = ((a == y1) & (b == y2)).astype(np.int64)
    for _ in range(horizon):
        e = _eps_vec(b, sign_rule, eps_rows, row_lo, eps_default)
        u = rng.random(n)
        c = np.where(e == 0, np.where(u < 0.5, 0, 1), np.minimum((u * 3.0).astype(np.int64), 2))
        b += np.where(c == 0, 1, np.where(c == 1, -1, 0))
        a += np.where(c == 2, e, 0)
        counts += (a == y1) & (b == y2)
    return counts


def visit_counts(seed, n, x1, x2, y1, y2, horizon, sign_rule, eps_rows, row_lo, eps_default):
    """Number of visits to ``(y1, y2)`` at times ``0..horizon`` for ``n`` walks."""
    fn = _visits_numba if numba_enabled() else _visits_numpy
    return fn(int(seed), int(n), int(x1), int(x2), int(y1), int(y2), int(horizon),
              bool(sign_rule), eps_rows, int(row_lo), int(eps_default))


# ---------------------------------------------------------- Fourier coefficients


@njit
def _nudft_numba(vals, t, m0, count):
    out = np.zeros(count)
    for j in range(t.shape[0]):
        c = vals[j] * np.exp(-1j * t[j] * m0)
        rot = np.exp(-1j * t[j])
        for k in range(count):
            out[k] += c.real
            c *= rot
    return out


def _nudft_numpy(vals, t, m0, count, block=512):
    out = np.empty(count)
    for start in range(0, count, block):
        m = m0 + np.arange(start, min(start + block, count))
        out[start : start + m.size] = (vals[None, :] * np.exp(-1j * np.outer(m, t))).real.sum(axis=1)
    return out


def nudft_real(vals, t, m0, count):
    """``out[k] = sum_j Re(vals[j] * exp(-i t[j] (m0 + k)))`` for ``k < count``."""
    vals = np.ascontiguousarray(vals, dtype=np.complex128)
    t = np.ascontiguousarray(t, dtype=np.float64)
    fn = _nudft_numba if numba_enabled() else _nudft_numpy
    return fn(vals, t, int(m0), int(count))
