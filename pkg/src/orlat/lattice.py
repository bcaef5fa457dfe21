"""The oriented lattice, its simple random walk kernel and one-step sampling.

Rows ``y`` of Z^2 carry a horizontal orientation ``eps(y)`` in {-1, 0, 1}.
From ``u`` the walk moves to ``u + e2`` or ``u - e2`` and, when
``eps(u2) != 0``, to ``u + eps(u2) e1``; each outgoing edge is taken with
probability ``1 / out_degree(u)``.  The default orientation is the sign
rule: rows above the axis point right, rows below point left and the axis
itself has no horizontal edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping

import numpy as np

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def _check_int64(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise OverflowError(f"coordinate {value} does not fit in a signed 64-bit integer")
    return value


@dataclass(frozen=True, order=True)
class Vertex:
    x1: int
    x2: int

    def __post_init__(self):
        for name in ("x1", "x2"):
            value = getattr(self, name)
            if isinstance(value, (bool, float)) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, _check_int64(int(value)))

    def shift(self, d1: int = 0, d2: int = 0) -> "Vertex":
        return Vertex(_check_int64(self.x1 + d1), _check_int64(self.x2 + d2))

    def reflect(self, center: int = 0) -> "Vertex":
        """Point reflection through ``(center, 0)``."""
        return Vertex(_check_int64(2 * center - self.x1), _check_int64(-self.x2))

    def on_axis(self) -> bool:
        return self.x2 == 0

    def __iter__(self):
        yield self.x1
        yield self.x2

    def __repr__(self) -> str:
        return f"Vertex({self.x1}, {self.x2})"


def as_vertex(v) -> Vertex:
    if isinstance(v, Vertex):
        return v
    a, b = v
    return Vertex(int(a), int(b))


class Orientation:
    """Maps a row index to its horizontal direction in {-1, 0, 1}."""

    def at(self, y: int) -> int:
        raise NotImplementedError

    def rows(self, lo: int, hi: int) -> np.ndarray:
        """Orientation of rows ``lo..hi`` (inclusive) as an int8 array."""
        return np.array([self.at(y) for y in range(lo, hi + 1)], dtype=np.int8)

    def signs_on(self, lo: int, hi: int) -> set[int]:
        return {int(v) for v in np.unique(self.rows(lo, hi))}


@dataclass(frozen=True)
class SignRule(Orientation):
    """``eps(0) = 0`` and ``eps(y) = sgn(y)`` elsewhere."""

    def at(self, y: int) -> int:
        return (y > 0) - (y < 0)

    def rows(self, lo: int, hi: int) -> np.ndarray:
        return np.sign(np.arange(lo, hi + 1, dtype=np.int64)).astype(np.int8)

    def signs_on(self, lo: int, hi: int) -> set[int]:
        out = set()
        if lo < 0:
            out.add(-1)
        if lo <= 0 <= hi:
            out.add(0)
        if hi > 0:
            out.add(1)
        return out


@dataclass(frozen=True)
class Table(Orientation):
    """Explicit per-row orientation with a mandatory default."""

    values: Mapping[int, int] = field(default_factory=dict)
    default: int = 0

    def __post_init__(self):
        clean = {}
        for y, e in dict(self.values).items():
            if e not in (-1, 0, 1):
                raise ValueError(f"orientation of row {y} must be -1, 0 or 1, got {e!r}")
            clean[int(y)] = int(e)
        if self.default not in (-1, 0, 1):
            raise ValueError(f"default orientation must be -1, 0 or 1, got {self.default!r}")
        object.__setattr__(self, "values", MappingProxyType(clean))

    def __hash__(self):
        return hash((tuple(sorted(self.values.items())), self.default))

    def __eq__(self, other):
        return (
            isinstance(other, Table)
            and dict(self.values) == dict(other.values)
            and self.default == other.default
        )

    def at(self, y: int) -> int:
        return self.values.get(y, self.default)


def orientation_at(orientation: Orientation, y: int) -> int:
    return orientation.at(y)


@dataclass(frozen=True)
class Kernel:
    """Simple random walk on the ``orientation``-oriented lattice."""

    orientation: Orientation = field(default_factory=SignRule)

    def out_degree(self, u: Vertex) -> int:
        return 2 if self.orientation.at(u.x2) == 0 else 3

    def out_neighbors(self, u) -> list[tuple[Vertex, Fraction]]:
        u = as_vertex(u)
        eps = self.orientation.at(u.x2)
        p = Fraction(1, 2 if eps == 0 else 3)
        out = [(u.shift(0, 1), p), (u.shift(0, -1), p)]
        if eps:
            out.append((u.shift(eps, 0), p))
        return out

    def transition_prob(self, u, v) -> Fraction:
        u, v = as_vertex(u), as_vertex(v)
        eps = self.orientation.at(u.x2)
        p = Fraction(1, 2 if eps == 0 else 3)
        if v.x1 == u.x1 and abs(v.x2 - u.x2) == 1:
            return p
        if eps and v.x2 == u.x2 and v.x1 == u.x1 + eps:
            return p
        return Fraction(0)

    def step(self, u, rng: np.random.Generator) -> Vertex:
        u = as_vertex(u)
        nbrs = self.out_neighbors(u)
        idx = min(int(rng.random() * len(nbrs)), len(nbrs) - 1)
        return nbrs[idx][0]


DEFAULT_KERNEL = Kernel()


def out_neighbors(k: Kernel, u) -> list[tuple[Vertex, Fraction]]:
    return k.out_neighbors(u)


def transition_prob(k: Kernel, u, v) -> Fraction:
    return k.transition_prob(u, v)


def step(k: Kernel, u, rng: np.random.Generator) -> Vertex:
    return k.step(u, rng)
