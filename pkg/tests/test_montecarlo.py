import math

import numpy as np
import pytest

from orlat.lattice import DEFAULT_KERNEL as K
from orlat.lattice import Vertex
from orlat.montecarlo import (
    binned_counts,
    chi2_direct_vs_geometric,
    chunk_seed,
    estimate_green,
    estimate_nu,
    hitting_time_tail,
    induced_direct_sample,
    induced_geometric_sample,
    sample_induced_direct,
    sample_induced_geometric,
    simulate,
)
from orlat.oracle import first_hit_axis, truncated_green
from orlat.spectral import PhiVariant

SEED = 20240611


def test_simulate_zero_steps():
    tr = simulate(K, (3, -2), 0, np.random.default_rng(0))
    assert tr.steps == (Vertex(3, -2),) and tr.axis_hits == ()


def test_simulate_path_invariants():
    rng = np.random.default_rng(4)
    tr = simulate(K, (0, 0), 2000, rng)
    assert tr.steps[1] in (Vertex(0, 1), Vertex(0, -1))
    for u, v in zip(tr.steps, tr.steps[1:]):
        assert K.transition_prob(u, v) > 0
    times = [t for t, _ in tr.axis_hits]
    assert times == sorted(set(times)) and all(t >= 1 for t in times)
    assert all(tr.steps[t] == Vertex(a, 0) for t, a in tr.axis_hits)
    assert sum(tr.local_times(2000).values()) == 2000


def test_one_step_law_over_a_million_draws():
    # visits to a neighbour within one step are one-step indicator draws
    n = 10**6
    for v, p in K.out_neighbors((5, 3)):
        est = estimate_green(K, (5, 3), v, n, 1, SEED)
        sd = math.sqrt(float(p) * (1 - float(p)) / n)
        assert abs(est.value - float(p)) < 4 * sd


def test_direct_sampler_symmetry():
    bulk = induced_direct_sample(200_000, SEED, bin_limit=40)
    v = bulk.values[bulk.status == 0]
    s = np.sign(v)
    assert abs(s.mean()) < 3 * s.std(ddof=1) / math.sqrt(s.size)
    pos, neg = np.count_nonzero(v > 0), np.count_nonzero(v < 0)
    assert abs(pos - neg) < 3 * math.sqrt(pos + neg)


def test_direct_sampler_zero_bin_inside_oracle_enclosure():
    n = 200_000
    bulk = induced_direct_sample(n, SEED + 1, bin_limit=5)
    p0 = np.count_nonzero((bulk.values == 0) & (bulk.status == 0)) / n
    rep = first_hit_axis(K, (0, 0), 4096, mode="float", track_local_time=False)
    lo, hi = rep.nu.get(0, 0.0), rep.nu.get(0, 0.0) + rep.escaped_mass
    sd = math.sqrt(p0 * (1 - p0) / n)
    assert lo - 3 * sd <= p0 <= hi + 3 * sd


def test_single_direct_draw():
    rng = np.random.default_rng(3)
    draws = [sample_induced_direct(K, rng, cap=10**6) for _ in range(200)]
    assert all(isinstance(d, int) for d in draws)
    down = sample_induced_direct(K, np.random.default_rng(8), start=(0, -1))
    assert down <= 0


def _capped_excursions(rng, n, cap):
    """Draw ``n`` excursions; those longer than ``cap`` count as ``None``."""
    out = []
    for _ in range(n):
        try:
            out.append(sample_induced_geometric(rng, cap=cap))
        except RuntimeError:
            out.append(None)
    return out


def test_geometric_excursion_invariants():
    rng = np.random.default_rng(11)
    for ex in _capped_excursions(rng, 300, 10**5):
        if ex is None:
            continue
        p = ex.y_path
        assert p[0] == 0 and p[-1] == 0 and all(y != 0 for y in p[1:-1])
        assert len({np.sign(y) for y in p[1:-1]}) == 1
        assert sum(ex.local_times.values()) == ex.sigma
        assert ex.recompute_displacement() == ex.x_displacement
        assert (ex.x_displacement >= 0) if p[1] > 0 else (ex.x_displacement <= 0)
        assert ex.time_change == ex.sigma + sum(ex.geom_draws)


def test_shortest_excursion_frequency():
    rng = np.random.default_rng(12)
    n = 20_000
    hits = sum(1 for ex in _capped_excursions(rng, n, 1000) if ex is not None and ex.y_path == (0, 1, 0))
    assert abs(hits / n - 0.25) < 4 * math.sqrt(0.25 * 0.75 / n)


def test_geometric_cap_raises():
    rng = np.random.default_rng(1)
    with pytest.raises(RuntimeError):
        for _ in range(200):
            sample_induced_geometric(rng, cap=3)


def test_samplers_agree_and_paper_convention_rejected():
    good = chi2_direct_vs_geometric(200_000, SEED, variant=PhiVariant.EXCURSION)
    assert good.pvalue > 0.01
    bad = chi2_direct_vs_geometric(200_000, SEED, variant=PhiVariant.PAPER)
    assert bad.pvalue < 1e-6


def test_binned_counts_tails_and_censoring():
    vals = np.array([-50, -2, 0, 0, 3, 99, 7])
    status = np.array([0, 0, 0, 0, 0, 0, 1], dtype=np.int8)
    c = binned_counts(vals, status, 3)
    assert c.tolist() == [1, 0, 1, 0, 2, 0, 0, 1, 1]


def test_estimate_green_trivial_case():
    est = estimate_green(K, (0, 0), (0, 0), 1000, 0, SEED)
    assert est.value == 1.0 and est.stderr == 0.0


def test_estimate_green_matches_oracle_on_twenty_pairs():
    rng = np.random.default_rng(SEED)
    for i in range(20):
        x = tuple(int(v) for v in rng.integers(-3, 4, 2))
        y = (x[0] + int(rng.integers(-3, 4)), x[1] + int(rng.integers(-3, 4)))
        est = estimate_green(K, x, y, 20_000, 50, SEED + i)
        ref = float(truncated_green(K, x, y, 50, mode="exact"))
        assert abs(est.value - ref) <= 3 * est.stderr + 1e-12, (x, y)


def test_estimate_green_monotone_in_horizon():
    vals = [estimate_green(K, (0, 1), (1, 0), 5000, h, SEED).value for h in (10, 20, 40, 80)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_estimate_nu_drift_and_oracle():
    law = estimate_nu(K, (0, 1), 100_000, SEED, cap=10**5)
    assert law.mean() > 0
    rep = first_hit_axis(K, (0, 1), 10_000, mode="float", track_local_time=False)
    for z in range(-2, 12):
        lo = rep.nu.get(z, 0.0)
        hi = lo + rep.escaped_mass
        sd = law.stderr(z)
        # censored draws can only remove mass from a bin
        assert lo - 3 * sd - law.deficit <= law.prob(z) <= hi + 3 * sd, z
    assert law.prob(-1) == 0


def test_estimate_nu_symmetric_at_origin():
    law = estimate_nu(K, (0, 0), 100_000, SEED, cap=10**5)
    for z in range(1, 6):
        a, b = law.counts.get(z, 0), law.counts.get(-z, 0)
        assert abs(a - b) < 4 * math.sqrt(a + b)


def test_censoring_is_reported():
    bulk = induced_direct_sample(5000, SEED, cap=20)
    assert bulk.censored > 0
    law = estimate_nu(K, (0, 0), 5000, SEED, cap=20)
    assert law.deficit == bulk.censored / 5000


def test_reproducible_and_thread_independent():
    kw = dict(cap=10**5, chunk_size=4096)
    a = induced_direct_sample(30_000, SEED, threads=1, **kw)
    b = induced_direct_sample(30_000, SEED, threads=3, **kw)
    c = induced_direct_sample(30_000, SEED, threads=1, **kw)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.values, c.values)
    assert np.array_equal(a.status, b.status) and np.array_equal(a.steps, b.steps)
    g1 = induced_geometric_sample(30_000, SEED, threads=1, **kw)
    g2 = induced_geometric_sample(30_000, SEED, threads=2, **kw)
    assert np.array_equal(g1.values, g2.values)
    e1 = estimate_green(K, (0, 0), (1, 1), 30_000, 30, SEED, chunk_size=4096, threads=1)
    e2 = estimate_green(K, (0, 0), (1, 1), 30_000, 30, SEED, chunk_size=4096, threads=4)
    assert e1 == e2


def test_chunk_seeds_differ():
    seeds = {chunk_seed(SEED, tag, c) for tag in (1, 2, 3) for c in range(50)}
    assert len(seeds) == 150


def test_hitting_time_tail_slope():
    bulk = induced_direct_sample(200_000, SEED, cap=10**4)
    surv, slope = hitting_time_tail(bulk.steps, [10, 30, 100, 300, 1000, 3000])
    assert np.all(np.diff(surv) < 0)
    assert abs(slope + 0.5) < 0.05
