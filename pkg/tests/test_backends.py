"""The compiled and the pure-numpy kernels must agree."""

import numpy as np
import pytest

from orlat import _accel
from orlat._kernels import nudft_real
from orlat.lattice import DEFAULT_KERNEL as K
from orlat.lattice import Kernel, Table
from orlat.montecarlo import chi2_direct_vs_geometric, estimate_green, simulate
from orlat.oracle import first_hit_axis, green_field
from orlat.spectral import green_row

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def both(monkeypatch, fn):
    monkeypatch.delenv("ORLAT_DISABLE_NUMBA", raising=False)
    assert _accel.backend_name() == "numba"
    a = fn()
    monkeypatch.setenv("ORLAT_DISABLE_NUMBA", "1")
    assert _accel.backend_name() == "numpy"
    b = fn()
    return a, b


@pytest.mark.parametrize("flag, want", [("1", "numpy"), ("true", "numpy"), ("0", "numba"), ("", "numba")])
@needs_numba
def test_flag_parsing(flag, want, monkeypatch):
    monkeypatch.setenv("ORLAT_DISABLE_NUMBA", flag)
    assert _accel.backend_name() == want


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("ORLAT_THREADS", "3")
    assert _accel.max_threads() == 3
    monkeypatch.setenv("ORLAT_THREADS", "junk")
    assert _accel.max_threads() >= 1


@needs_numba
@pytest.mark.parametrize("k", [K, Kernel(Table({0: 0, 2: -1}, default=1))])
def test_oracle_sweeps_agree(k, monkeypatch):
    def run():
        rep = first_hit_axis(k, (1, 2), 300, mode="float")
        fmap, lost = green_field(k, (0, -1), 200, mode="float", discount=0.9)
        return rep, fmap, lost

    (r1, f1, l1), (r2, f2, l2) = both(monkeypatch, run)
    assert abs(r1.escaped_mass - r2.escaped_mass) < 1e-13
    assert max(abs(r1.nu.get(z, 0) - w) for z, w in r2.nu.items()) < 1e-13
    for y in [(0, 0), (3, 2), (-5, -4), (1, 2)]:
        assert abs(r1.local_time.get(y, 0.0) - r2.local_time.get(y, 0.0)) < 1e-14
        assert abs(f1.get(y, 0.0) - f2.get(y, 0.0)) < 1e-14


@needs_numba
def test_walks_agree_given_the_same_uniforms(monkeypatch):
    a, b = both(monkeypatch, lambda: simulate(K, (2, -1), 5000, np.random.default_rng(5)))
    assert a == b


@needs_numba
def test_fourier_sums_agree(monkeypatch):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=700) + 1j * rng.normal(size=700)
    t = rng.uniform(0, np.pi, 700)
    a, b = both(monkeypatch, lambda: nudft_real(vals, t, -40, 90))
    assert np.max(np.abs(a - b)) < 1e-10
    ra, rb = both(monkeypatch, lambda: green_row(1, 2, -6, 13)[0])
    assert np.max(np.abs(ra - rb)) < 1e-12


@needs_numba
def test_samplers_valid_on_both_backends(monkeypatch):
    # the two backends draw from different streams; each must be statistically sound
    def run():
        chi = chi2_direct_vs_geometric(50_000, 3, limit=15)
        est = estimate_green(K, (0, 0), (1, 1), 20_000, 40, 3)
        return chi, est

    (c1, e1), (c2, e2) = both(monkeypatch, run)
    assert c1.pvalue > 0.01 and c2.pvalue > 0.01
    assert abs(e1.value - e2.value) < 4 * np.hypot(e1.stderr, e2.stderr)
