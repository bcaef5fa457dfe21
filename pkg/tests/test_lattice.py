from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orlat.lattice import (
    DEFAULT_KERNEL,
    Kernel,
    SignRule,
    Table,
    Vertex,
    orientation_at,
    out_neighbors,
    step,
    transition_prob,
)

coords = st.integers(-50, 50)
vertices = st.builds(Vertex, coords, coords)
small_steps = st.tuples(st.integers(-2, 2), st.integers(-2, 2))


@pytest.mark.parametrize("y, want", [(0, 0), (-7, -1), (3, 1)])
def test_sign_rule(y, want):
    assert orientation_at(SignRule(), y) == want


def test_table_lookup_falls_back_to_default():
    t = Table({2: -1, 5: 0}, default=1)
    assert [orientation_at(t, y) for y in (2, 5, 0, -9)] == [-1, 0, 1, 1]


def test_table_rejects_bad_entries():
    with pytest.raises(ValueError):
        Table({1: 2}, default=0)
    with pytest.raises(ValueError):
        Table({}, default=3)


def test_out_neighbors_examples():
    assert out_neighbors(DEFAULT_KERNEL, (0, 0)) == [(Vertex(0, 1), Fraction(1, 2)),
                                                     (Vertex(0, -1), Fraction(1, 2))]
    third = Fraction(1, 3)
    assert out_neighbors(DEFAULT_KERNEL, (5, 3)) == [(Vertex(5, 4), third), (Vertex(5, 2), third),
                                                     (Vertex(6, 3), third)]
    assert out_neighbors(DEFAULT_KERNEL, (5, -3)) == [(Vertex(5, -2), third), (Vertex(5, -4), third),
                                                      (Vertex(4, -3), third)]


@pytest.mark.parametrize("u, v, want", [((0, 0), (0, 1), Fraction(1, 2)),
                                        ((0, 1), (1, 1), Fraction(1, 3)),
                                        ((0, 1), (-1, 1), Fraction(0)),
                                        ((0, 0), (1, 0), Fraction(0)),
                                        ((3, 3), (3, 5), Fraction(0))])
def test_transition_prob_examples(u, v, want):
    assert transition_prob(DEFAULT_KERNEL, u, v) == want


def test_overflow_rejected():
    big = 2**63 - 1
    with pytest.raises(OverflowError):
        Vertex(big + 1, 0)
    with pytest.raises(OverflowError):
        out_neighbors(DEFAULT_KERNEL, (0, big))
    with pytest.raises(OverflowError):
        Vertex(big, 1).shift(1, 0)


def test_vertex_rejects_non_integers():
    with pytest.raises(TypeError):
        Vertex(1.0, 0)
    with pytest.raises(TypeError):
        Vertex(True, 0)


@given(vertices)
def test_row_sums_exactly_one(u):
    total = sum((p for _, p in DEFAULT_KERNEL.out_neighbors(u)), Fraction(0))
    assert total == 1 and isinstance(total, Fraction)
    assert DEFAULT_KERNEL.out_degree(u) == (2 if u.x2 == 0 else 3)


@given(vertices, st.dictionaries(st.integers(-5, 5), st.sampled_from([-1, 0, 1])),
       st.sampled_from([-1, 0, 1]))
def test_row_sums_table(u, values, default):
    k = Kernel(Table(values, default=default))
    nbrs = k.out_neighbors(u)
    assert sum((p for _, p in nbrs), Fraction(0)) == 1
    assert len(nbrs) == k.out_degree(u)
    assert all(k.transition_prob(u, v) == p for v, p in nbrs)


@given(vertices, small_steps, st.integers(-20, 20))
def test_point_reflection_symmetry(u, d, c):
    v = u.shift(*d)
    k = DEFAULT_KERNEL
    assert k.transition_prob(u, v) == k.transition_prob(u.reflect(c), v.reflect(c))


@given(vertices, small_steps, st.integers(-20, 20))
def test_horizontal_translation(u, d, shift):
    v = u.shift(*d)
    k = DEFAULT_KERNEL
    assert k.transition_prob(u, v) == k.transition_prob(u.shift(shift), v.shift(shift))


@given(vertices, small_steps)
def test_transition_prob_matches_neighbor_list(u, d):
    v = u.shift(*d)
    listed = dict(DEFAULT_KERNEL.out_neighbors(u))
    assert DEFAULT_KERNEL.transition_prob(u, v) == listed.get(v, 0)


def test_step_support_and_reproducibility():
    rng = np.random.default_rng(1)
    seen = {step(DEFAULT_KERNEL, (0, 0), rng) for _ in range(200)}
    assert seen == {Vertex(0, 1), Vertex(0, -1)}
    assert all(step(DEFAULT_KERNEL, (0, -1), rng) != Vertex(1, -1) for _ in range(500))
    a = [step(DEFAULT_KERNEL, (2, 2), np.random.default_rng(9)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_step_frequencies_within_four_sigma():
    rng = np.random.default_rng(20240611)
    n = 200_000
    nbrs = [v for v, _ in DEFAULT_KERNEL.out_neighbors((5, 3))]
    draws = [DEFAULT_KERNEL.step((5, 3), rng) for _ in range(n)]
    sd = np.sqrt(n * (1 / 3) * (2 / 3))
    for v in nbrs:
        assert abs(sum(1 for d in draws if d == v) - n / 3) < 4 * sd
