"""Shared reference computations written independently of the package."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest


def sign(y: int) -> int:
    return (y > 0) - (y < 0)


def enumerate_paths(x, n):
    """Law of the walk after ``n`` steps by brute force over all paths (Fractions)."""
    law = {tuple(x): Fraction(1)}
    for _ in range(n):
        nxt = {}
        for (a, b), w in law.items():
            e = sign(b)
            moves = [(a, b + 1), (a, b - 1)] + ([(a + e, b)] if e else [])
            p = w / len(moves)
            for m in moves:
                nxt[m] = nxt.get(m, 0) + p
        law = nxt
    return law


def brute_green(x, y, n):
    """``sum_{k<=n} P^k(x, y)`` by repeated brute-force stepping."""
    return sum((enumerate_paths(x, k).get(tuple(y), Fraction(0)) for k in range(n + 1)), Fraction(0))


def dense_discounted_green(x, s, n_steps, radius):
    """``sum_k s^k P^k(x, .)`` on a dense square grid; returns ``(grid, offset)``.

    ``radius`` must exceed ``n_steps`` plus the start's distance to the origin so
    nothing falls off the grid.
    """
    size = 2 * radius + 1
    cur = np.zeros((size, size))
    cur[x[0] + radius, x[1] + radius] = 1.0
    rows = np.arange(-radius, radius + 1)
    up, down = rows > 0, rows < 0
    acc = cur.copy()
    for _ in range(n_steps):
        nxt = np.zeros_like(cur)
        third = cur / 3.0
        half = cur / 2.0
        # vertical moves: axis row splits in halves, other rows in thirds
        share = np.where(rows == 0, half, third)
        nxt[:, 1:] += share[:, :-1]
        nxt[:, :-1] += share[:, 1:]
        # horizontal: right above the axis, left below
        nxt[1:, up] += third[:-1, up]
        nxt[:-1, down] += third[1:, down]
        cur = s * nxt
        acc += cur
    return acc, radius


@pytest.fixture(scope="session")
def discounted_field():
    cache = {}

    def get(x, s=0.8, n_steps=200):
        key = (tuple(x), s, n_steps)
        if key not in cache:
            cache[key] = dense_discounted_green(x, s, n_steps, n_steps + 8)
        return cache[key]

    return get


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} | {detail}")
