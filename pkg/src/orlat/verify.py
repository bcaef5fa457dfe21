"""Invariant suites run by ``orlat verify``.

Each suite returns a list of :class:`Check` records.  Reports carry no
timestamps or timings so two runs with the same configuration produce
identical bytes.
"""

from __future__ import annotations

import contextlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import __version__
from ._accel import backend_name
from .lattice import DEFAULT_KERNEL, Kernel, Table, Vertex
from .martin import (
    DirectionalSequence,
    fit_asymptotics,
    geometric_ks,
    green_general,
    local_time_decay,
    martin_kernel,
    martin_kernel_induced,
    split_identity,
)
from .montecarlo import (
    chi2_direct_vs_geometric,
    estimate_green,
    estimate_nu,
    induced_direct_sample,
    simulate,
)
from .oracle import (
    char_of_first_hit,
    decompose_at_first_hit,
    evolve,
    first_hit_axis,
    green_field,
    truncated_green,
)
from .quadrature import QuadratureError, QuadratureSpec, singular_integral
from .spectral import (
    PhiVariant,
    arbitrate,
    as_variant,
    fit_small_t,
    g_of,
    green_from_axis,
    green_induced,
    green_offaxis,
    phi,
    phi_shift,
    r_of,
)

SUITES = ("kernel", "oracle", "spectral", "mc", "martin")


@dataclass(frozen=True)
class VerifyConfig:
    seed: int = 20240611
    horizon: int = 2**14
    paths: int = 10**6
    abs_tol: float = 1e-9
    variant: str = "auto"
    phi_shift: float = 0.0

    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(abs_tol=self.abs_tol)


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    tolerance: object
    detail: str = ""


def _plain(v):
    """JSON-friendly copy of ``v``; floats are kept to full precision."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, PhiVariant):
        return v.value
    return v if v is None or isinstance(v, str) else str(v)


@dataclass
class _Collector:
    checks: list = field(default_factory=list)

    def add(self, name, passed, value, tolerance, detail=""):
        self.checks.append(Check(name, bool(passed), _plain(value), _plain(tolerance), detail))

    @contextlib.contextmanager
    def guard(self, name, tolerance):
        """Record a failed check when the block raises a numerical failure."""
        try:
            yield
        except (QuadratureError, ArithmeticError) as exc:
            self.add(name, False, None, tolerance, f"{type(exc).__name__}: {exc}")


# ------------------------------------------------------------------ kernel


def suite_kernel(cfg: VerifyConfig) -> list[Check]:
    c = _Collector()
    box = [Vertex(a, b) for a in range(-6, 7) for b in range(-6, 7)]
    table = Kernel(Table({0: 0, 1: -1, 2: 1, -1: 1, -3: 0}, default=1))
    for label, k in (("sign rule", DEFAULT_KERNEL), ("table", table)):
        sums = {u: sum((p for _, p in k.out_neighbors(u)), Fraction(0)) for u in box}
        c.add(f"row sums equal one exactly ({label})", all(s == 1 for s in sums.values()),
              len(box), "exact")
        deg = all(k.out_degree(u) == len(k.out_neighbors(u)) for u in box)
        c.add(f"out-degree matches neighbour count ({label})", deg, len(box), "exact")
    ok = all(DEFAULT_KERNEL.transition_prob(u, v) == DEFAULT_KERNEL.transition_prob(u.reflect(), v.reflect())
             for u in box for v, _ in DEFAULT_KERNEL.out_neighbors(u))
    c.add("point reflection maps the sign-rule kernel to itself", ok, len(box), "exact")
    ok = all(DEFAULT_KERNEL.transition_prob(u, v) == DEFAULT_KERNEL.transition_prob(u.shift(7), v.shift(7))
             for u in box for v, _ in DEFAULT_KERNEL.out_neighbors(u))
    c.add("horizontal translation invariance", ok, len(box), "exact")
    law = dict((v, p) for v, p in DEFAULT_KERNEL.out_neighbors((0, 0)))
    c.add("one step from the origin", law == {Vertex(0, 1): Fraction(1, 2), Vertex(0, -1): Fraction(1, 2)},
          law, "exact")
    c.add("no leftward edge above the axis", DEFAULT_KERNEL.transition_prob((0, 1), (-1, 1)) == 0, 0, "exact")
    return c.checks


# ------------------------------------------------------------------ oracle


def suite_oracle(cfg: VerifyConfig) -> list[Check]:
    c = _Collector()
    k = DEFAULT_KERNEL
    two = evolve(k, Vertex(0, 0), 2)
    want = {Vertex(0, 0): Fraction(1, 3), Vertex(0, 2): Fraction(1, 6), Vertex(1, 1): Fraction(1, 6),
            Vertex(0, -2): Fraction(1, 6), Vertex(-1, -1): Fraction(1, 6)}
    c.add("two-step law from the origin", dict(two.weights) == want, dict(two.weights), "exact")
    a = evolve(k, evolve(k, Vertex(1, -2), 3), 4)
    b = evolve(k, Vertex(1, -2), 7)
    c.add("Chapman-Kolmogorov 3 + 4 = 7", dict(a.weights) == dict(b.weights), len(b), "exact")
    c.add("mass preserved exactly", b.total_mass == 1, b.total_mass, "exact")
    g = truncated_green(k, (0, 0), (0, 0), 2)
    c.add("truncated Green at the origin, horizon 2", g == Fraction(4, 3), g, "exact")
    rep = first_hit_axis(k, (0, 0), 2)
    c.add("first hit within two steps", rep.nu == {0: Fraction(1, 3)} and rep.escaped_mass == Fraction(2, 3),
          rep.escaped_mass, "exact")
    rep = first_hit_axis(k, (0, 0), 24, mode="exact")
    cons = sum(rep.nu.values(), Fraction(0)) + rep.escaped_mass
    c.add("hit mass plus escaped mass is one", cons == 1, cons, "exact")
    c.add("first-hit law symmetric from the origin", all(rep.nu.get(-z, 0) == w for z, w in rep.nu.items()),
          len(rep.nu), "exact")
    up = first_hit_axis(k, (0, 3), 24, mode="exact").nu
    down = first_hit_axis(k, (0, -3), 24, mode="exact").nu
    c.add("reflection of the start reflects the law", all(down.get(-z, 0) == w for z, w in up.items()),
          len(up), "exact")
    worst = 0
    for x, y in (((0, 0), (2, 0)), ((0, 1), (3, 1)), ((1, -2), (-1, 0)), ((0, 2), (0, -1))):
        lhs = truncated_green(k, x, y, 14, mode="exact")
        rhs = decompose_at_first_hit(k, x, y, 14)
        worst = max(worst, abs(lhs - rhs))
    c.add("split at the first axis visit (exact, horizon 14)", worst == 0, worst, "exact")
    ex = first_hit_axis(k, (0, 1), 30, mode="exact")
    fl = first_hit_axis(k, (0, 1), 30, mode="float")
    err = max(abs(float(ex.nu.get(z, 0)) - fl.nu.get(z, 0.0)) for z in set(ex.nu) | set(fl.nu))
    c.add("float mode agrees with exact mode", err < 1e-14, err, 1e-14)
    e = {n: first_hit_axis(k, (0, 0), n, mode="float", track_local_time=False).escaped_mass
         for n in (256, 1024, 4096)}
    r1, r2 = e[1024] / e[256], e[4096] / e[1024]
    c.add("escaped mass decays like N^-1/2", abs(r1 - 0.5) < 0.05 and abs(r2 - 0.5) < 0.05, [r1, r2],
          "0.5 +- 10%")
    lo, w = char_of_first_hit(first_hit_axis(k, (0, 0), 64, mode="float", track_local_time=False), 0.0)
    c.add("characteristic function at zero", abs(lo - (1 - w)) < 1e-12, lo, 1e-12)
    return c.checks


# ------------------------------------------------------------------ spectral


def _discounted_pairs():
    return (((0, 0), (0, 0)), ((0, 0), (3, 0)), ((0, 1), (1, 1)), ((0, 1), (3, 2)),
            ((2, -1), (-1, 1)), ((0, 2), (0, -2)), ((0, 0), (-1, 1)), ((0, -1), (-4, -3)))


def suite_spectral(cfg: VerifyConfig) -> list[Check]:
    c = _Collector()
    q = cfg.quad()
    with phi_shift(cfg.phi_shift):
        variant = as_variant(cfg.variant)
        c.add("r(0) = 1", abs(r_of(0.0) - 1) < 1e-15, r_of(0.0), 1e-15)
        c.add("r(pi) = 1/5", abs(r_of(math.pi) - 0.2) < 1e-15, r_of(math.pi).real, 1e-15)
        c.add("g(1/2) = 2 - sqrt 3", abs(g_of(0.5) - (2 - math.sqrt(3))) < 1e-15, g_of(0.5), 1e-15)
        p_pi = phi(math.pi, PhiVariant.PAPER)
        e_pi = phi(math.pi, PhiVariant.EXCURSION)
        c.add("paper form at pi", abs(p_pi - (25 - 10 * math.sqrt(6))) < 1e-12, p_pi, 1e-12)
        c.add("excursion form at pi", abs(e_pi - (2 - math.sqrt(3))) < 1e-12, e_pi, 1e-12)
        ts = np.random.default_rng(cfg.seed).uniform(-math.pi, math.pi, 200)
        even = max(float(np.max(np.abs(phi(ts, v) - phi(-ts, v)))) for v in PhiVariant)
        c.add("phi is even", even < 1e-14, even, 1e-14)
        grid = np.linspace(-math.pi, math.pi, 4001)
        grid = grid[grid != 0]
        top = max(float(np.max(np.abs(phi(grid, v)))) for v in PhiVariant)
        c.add("|phi| < 1 away from zero", top < 1, top, 1)
        fit = fit_small_t(variant)
        c.add("1 - phi ~ kappa sqrt(t) near zero", abs(fit.slope - 0.5) < 0.02, fit.slope, "0.5 +- 0.02")
        ref = singular_integral(lambda t: np.abs(t) ** -0.5, q, symmetric=True)
        c.add("integral of |t|^-1/2", abs(ref.value - 4 * math.sqrt(math.pi)) < q.abs_tol, ref.value, q.abs_tol)
        try:
            arb = arbitrate(cfg.horizon)
        except RuntimeError as exc:
            c.add("oracle enclosure singles out one form", False, None, f"horizon {cfg.horizon}", str(exc))
        else:
            c.add("oracle enclosure singles out one form", True, arb.winner, f"horizon {arb.horizon}",
                  f"escaped mass {arb.escaped_mass:.3e}")
            c.add("enclosure width below 2e-2", 2 * arb.escaped_mass < 2e-2, 2 * arb.escaped_mass, 2e-2)
        with c.guard("discounted Green matches the discounted oracle", 1e-8):
            worst = 0.0
            for x, y in _discounted_pairs():
                fieldmap, lost = green_field(DEFAULT_KERNEL, x, 160, mode="float", discount=0.8)
                spec = green_offaxis(x, y, variant, q, s=0.8).value
                worst = max(worst, abs(spec - fieldmap.get(y, 0.0)))
            c.add("discounted Green matches the discounted oracle", worst < 1e-8, worst, 1e-8)
        with c.guard("induced Green symmetric", 1e-12):
            sym = max(abs(green_induced(v, variant, q).value - green_induced(-v, variant, q).value)
                      for v in range(1, 11))
            c.add("induced Green symmetric", sym < 1e-12, sym, 1e-12)
        with c.guard("truncation gap shrinks like N^-1/2", "0.5 +- 0.02"):
            fld = {}
            for n in (256, 1024):
                fmap, _ = green_field(DEFAULT_KERNEL, (0, 0), n, mode="float", prune_tol=1e-30)
                fld[n] = fmap
            gaps = {n: [green_induced(v, variant, q).value - fld[n].get((v, 0), 0.0) for v in range(-5, 6)]
                    for n in fld}
            c.add("spectral value above every truncated sum", min(min(g) for g in gaps.values()) > 0,
                  min(min(g) for g in gaps.values()), "> 0")
            ratio = [b / a for a, b in zip(gaps[256], gaps[1024])]
            c.add("truncation gap shrinks like N^-1/2", all(abs(r - 0.5) < 0.02 for r in ratio), ratio,
                  "0.5 +- 0.02")
        with c.guard("halving the tolerance stays within the error estimate", "error estimate"):
            loose = green_induced(3, variant, QuadratureSpec(abs_tol=2 * q.abs_tol))
            tight = green_induced(3, variant, q)
            c.add("halving the tolerance stays within the error estimate",
                  abs(loose.value - tight.value) <= loose.error + tight.error, abs(loose.value - tight.value),
                  loose.error + tight.error)
    return c.checks


# ------------------------------------------------------------------ Monte Carlo


def suite_mc(cfg: VerifyConfig) -> list[Check]:
    c = _Collector()
    k = DEFAULT_KERNEL
    rng = np.random.default_rng(cfg.seed)
    first = [simulate(k, (2, 1), 1, rng).steps[1] for _ in range(30000)]
    worst = 0.0
    for v, p in k.out_neighbors((2, 1)):
        f = sum(1 for s in first if s == v) / len(first)
        worst = max(worst, abs(f - float(p)) / math.sqrt(float(p) * (1 - float(p)) / len(first)))
    c.add("one-step frequencies", worst < 4, worst, "4 sigma")
    tr = simulate(k, (0, 0), 500, rng)
    c.add("local times partition time", sum(tr.local_times(500).values()) == 500,
          sum(tr.local_times(500).values()), "exact")
    chi = chi2_direct_vs_geometric(cfg.paths, cfg.seed, variant=cfg.variant)
    c.add("direct and geometric samplers agree (chi-square)", chi.pvalue > 0.01, chi.pvalue, "> 0.01",
          f"statistic {chi.statistic:.4f} on {chi.dof} dof")
    worst = 0.0
    pairs = (((0, 0), (0, 0)), ((0, 0), (1, 1)), ((0, 1), (2, 1)), ((1, -1), (-1, 0)), ((0, 2), (0, -1)))
    for i, (x, y) in enumerate(pairs):
        est = estimate_green(k, x, y, 40000, 50, cfg.seed + i)
        ref = float(truncated_green(k, x, y, 50))
        worst = max(worst, abs(est.value - ref) / max(est.stderr, 1e-12))
    c.add("visit counts match the oracle", worst < 3, worst, "3 sigma")
    a = induced_direct_sample(20000, cfg.seed, bin_limit=50, chunk_size=4096, threads=1)
    b = induced_direct_sample(20000, cfg.seed, bin_limit=50, chunk_size=4096, threads=4)
    c.add("thread count does not change the draws", np.array_equal(a.values, b.values), int(a.values.sum()),
          "identical")
    law = estimate_nu(k, (0, 1), 20000, cfg.seed, cap=10**6)
    c.add("first hit drifts right from above the axis", law.mean() > 0, law.mean(), "> 0")
    return c.checks


# ------------------------------------------------------------------ martin


def suite_martin(cfg: VerifyConfig) -> list[Check]:
    c = _Collector()
    q = cfg.quad()
    with phi_shift(cfg.phi_shift):
        variant = as_variant(cfg.variant)
        with c.guard("martin suite evaluated without numerical failure", "no exception"):
            kk = [martin_kernel_induced(u, 4096, variant, q) for u in (-5, -1, 1, 5)]
            c.add("axis kernel tends to one", max(abs(x - 1) for x in kk) < 0.05, kk, 0.05)
            c.add("axis kernel at the base point", martin_kernel_induced(0, 17, variant, q) == 1.0, 1.0, "exact")
            horizon = min(cfg.horizon, 2**12)
            worst = 0.0
            for x, y in (((0, 1), (0, 0)), ((-2, 2), (3, 0)), ((1, 1), (2, 1)), ((3, 2), (-1, -1))):
                left, right, bound = split_identity(x, y, horizon, variant, q)
                worst = max(worst, abs(left - right) / bound)
            c.add("split identity within its bound", worst <= 1, worst, "<= 1 (relative to bound)")
            g1, e1 = green_general((0, 1), (2, -3), horizon, variant, q)
            g2, e2 = green_general((0, -1), (-2, 3), horizon, variant, q)
            c.add("central symmetry of the split Green function", abs(g1 - g2) <= 2 * max(e1, e2), abs(g1 - g2),
                  2 * max(e1, e2))
            ks = geometric_ks(32, 256, 8)
            seq = DirectionalSequence.parabolic(0.0, ks)
            vals = [green_from_axis((0, 0), y, variant, q).value for y in seq]
            fit = fit_asymptotics(seq, vals)
            c.add("vertical decay exponent", abs(fit.exponent + 1) < 0.05, fit.exponent, "-1 +- 0.05")
            hseq = DirectionalSequence.horizontal(1, [2**j for j in range(6, 14)])
            hv = [green_from_axis((0, 0), y, variant, q).value for y in hseq]
            hfit = fit_asymptotics(hseq, hv)
            c.add("horizontal decay exponent", abs(hfit.exponent + 0.5) < 0.05, hfit.exponent, "-0.5 +- 0.05")
            box = [(a, b) for a in (-3, 0, 3) for b in (-3, -1, 0, 2)]
            worst = max(abs(martin_kernel(x, (0, 256), variant=variant, q=q).value - 1) for x in box)
            c.add("Martin kernel near one far up the axis", worst < 0.05, worst, 0.05)
            rep = local_time_decay([(k, 1) for k in (8, 16, 32, 64)], horizon)
            c.add("pre-hit local time decays along a row", rep.verdict == "decreasing", list(rep.scaled),
                  "decreasing")
    return c.checks


_RUNNERS: dict[str, Callable[[VerifyConfig], list[Check]]] = {
    "kernel": suite_kernel,
    "oracle": suite_oracle,
    "spectral": suite_spectral,
    "mc": suite_mc,
    "martin": suite_martin,
}


def run(suite: str, cfg: VerifyConfig = VerifyConfig()) -> dict:
    """Run one suite (or ``"all"``) and return a JSON-ready report."""
    names = SUITES if suite == "all" else (suite,)
    for n in names:
        if n not in _RUNNERS:
            raise ValueError(f"unknown suite {n!r}; choose from {', '.join(SUITES)} or all")
    results = {}
    for n in names:
        checks = _RUNNERS[n](cfg)
        results[n] = {"passed": all(ch.passed for ch in checks), "checks": [asdict(ch) for ch in checks]}
    return {
        "version": __version__,
        "backend": backend_name(),
        "config": _plain(asdict(cfg)),
        "suites": results,
        "passed": all(r["passed"] for r in results.values()),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


__all__ = ["Check", "SUITES", "VerifyConfig", "dumps", "run"]

