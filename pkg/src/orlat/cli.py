"""Command-line front end.

Subcommands ``phi``, ``green``, ``martin`` and ``verify``.  Tables are
written as CSV with ``#`` header lines (resolved configuration and version)
or as JSON with the same information under ``meta``.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 resource or
convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import DEFAULT_KERNEL, Vertex
from .martin import DirectionalSequence, martin_kernel
from .montecarlo import estimate_green
from .oracle import ResourceLimitError, char_of_first_hit, first_hit_axis, green_field
from .quadrature import QuadratureError, QuadratureSpec
from .spectral import PhiVariant, arbitrate, as_variant, green_offaxis, phi

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3

# per-command horizon defaults; --horizon overrides all of them
HORIZON_DEFAULTS = {"phi": 2**14, "green": 1024, "martin": 2**12, "verify": 2**14}
PATHS_DEFAULTS = {"green": 100_000, "verify": 10**6}


@dataclass
class RunConfig:
    command: str
    seed: int = 20240611
    horizon: int | None = None
    n_paths: int | None = None
    abs_tol: float = 1e-9
    variant: str = "auto"
    output_path: str = "-"
    format: str = "csv"

    def resolved(self) -> "RunConfig":
        if self.horizon is None:
            self.horizon = HORIZON_DEFAULTS.get(self.command, 1024)
        if self.n_paths is None:
            self.n_paths = PATHS_DEFAULTS.get(self.command, 100_000)
        return self


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------ parsing


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b' with integers, got {text!r}") from None
    return a, b


def _span(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo:hi', got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _box(text: str) -> tuple[tuple[int, int], tuple[int, int]]:
    try:
        a, b = text.split(",")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo:hi,lo:hi', got {text!r}") from None
    return _span(a), _span(b)


def _ints(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="base seed of every random stream")
    p.add_argument("--horizon", type=int, help="oracle or simulation horizon in steps")
    p.add_argument("--paths", type=int, dest="n_paths", help="Monte Carlo sample count")
    p.add_argument("--tol", type=float, dest="abs_tol", help="absolute quadrature tolerance")
    p.add_argument("--variant", choices=["paper", "excursion", "auto"],
                   help="closed form used for phi; auto runs the oracle arbitration")
    p.add_argument("--out", dest="output_path", help="output file ('-' for stdout)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--config", help="JSON file with default values for the flags above")


def _add_sequence(p: argparse.ArgumentParser, required: bool):
    p.add_argument("--sequence", choices=["parabolic", "horizontal", "cubic"], required=required,
                   help="directional target sequence")
    p.add_argument("--lam", type=float, default=0.0, help="limit of y1 / y2^2 (parabolic)")
    p.add_argument("--sign", type=int, choices=[-1, 1], default=1, help="direction (horizontal, cubic)")
    p.add_argument("--height", type=int, default=0, help="row of a horizontal sequence")
    p.add_argument("--k", type=_ints, default=[32, 64, 128, 256], help="comma-separated indices k")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orlat", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"orlat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="phi candidates and the oracle enclosure on a grid")
    _add_common(p)
    p.add_argument("--grid", type=int, default=16, help="rows at t = k pi / grid, k = 0..grid")

    p = sub.add_parser("green", help="Green function values by one of three routes")
    _add_common(p)
    p.add_argument("--x", type=_pair, default=(0, 0), help="start vertex 'a,b'")
    where = p.add_mutually_exclusive_group()
    where.add_argument("--y", type=_pair, help="single target 'a,b'")
    where.add_argument("--rect", type=_box, help="targets in 'lo:hi,lo:hi' (inclusive; write --rect=-1:2,0:2 for negative bounds)")
    _add_sequence(p, required=False)
    p.add_argument("--route", choices=["spectral", "oracle", "mc"], default="spectral")

    p = sub.add_parser("martin", help="Martin kernel along a directional sequence")
    _add_common(p)
    p.add_argument("--box", type=_box, default=((-3, 3), (-3, 3)), help="starts in 'lo:hi,lo:hi' (use --box=... for negative bounds)")
    _add_sequence(p, required=False)

    p = sub.add_parser("verify", help="run the invariant suites")
    _add_common(p)
    p.add_argument("--suite", choices=["kernel", "oracle", "spectral", "mc", "martin", "all"],
                   default="all")
    p.add_argument("--inject-phi-shift", type=float, default=0.0,
                   help="add this constant to phi (fault-injection canary)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = RunConfig(command=args.command)
    keys = {"seed", "horizon", "n_paths", "abs_tol", "variant", "output_path", "format"}
    aliases = {"paths": "n_paths", "tol": "abs_tol", "out": "output_path"}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
        for key, value in raw.items():
            key = aliases.get(key, key)
            if key not in keys:
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    cfg.resolved()
    if cfg.horizon < 1 or cfg.n_paths < 1 or not cfg.abs_tol > 0:
        raise UsageError("horizon and paths must be positive, tol must be > 0")
    if cfg.format not in ("csv", "json") or cfg.variant not in ("paper", "excursion", "auto"):
        raise UsageError("format must be csv or json; variant paper, excursion or auto")
    return cfg


# ------------------------------------------------------------------ output


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(cfg: RunConfig, columns: list[str], rows: list[tuple], extra: dict | None = None) -> str:
    meta = {"version": __version__, "config": asdict(cfg)}
    if extra:
        meta.update(extra)
    if cfg.format == "json":
        body = {"meta": meta, "columns": columns, "rows": [list(r) for r in rows]}
        return json.dumps(body, indent=2, sort_keys=True, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# orlat {__version__}\n")
    buf.write(f"# config: {json.dumps(asdict(cfg), sort_keys=True)}\n")
    for key in sorted(extra or {}):
        buf.write(f"# {key}: {json.dumps(extra[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def emit(cfg: RunConfig, text: str):
    if cfg.output_path in ("-", "", None):
        sys.stdout.write(text)
    else:
        Path(cfg.output_path).write_text(text)


def read_csv(path_or_text: str) -> tuple[list[str], list[list[str]]]:
    """Columns and rows of a CSV written by :func:`render`, comments skipped."""
    text = Path(path_or_text).read_text() if "\n" not in path_or_text else path_or_text
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# ------------------------------------------------------------------ commands


def _variant(cfg: RunConfig) -> PhiVariant:
    return as_variant(cfg.variant)


def cmd_phi(cfg: RunConfig, grid: int):
    if grid < 1:
        raise UsageError("--grid must be positive")
    t = math.pi * np.arange(grid + 1) / grid
    report = first_hit_axis(DEFAULT_KERNEL, Vertex(0, 0), cfg.horizon, mode="float",
                            track_local_time=False)
    centre, width = char_of_first_hit(report, t)
    paper = phi(t, PhiVariant.PAPER)
    exc = phi(t, PhiVariant.EXCURSION)
    rows = [(float(t[i]), float(paper[i]), float(exc[i]), float(centre[i] - width), float(centre[i] + width))
            for i in range(t.size)]
    inside = {
        name: [lo <= v <= hi for v, (_, _, _, lo, hi) in zip(vals, rows)]
        for name, vals in (("paper", paper), ("excursion", exc))
    }
    extra = {"escaped_mass": float(width),
             "inside": {k: int(sum(bool(b) for b in v[1:])) for k, v in inside.items()},
             "rows_excluding_t0": grid}
    cols = ["t", "phi_paper", "phi_excursion", "oracle_low", "oracle_high"]
    return cols, rows, extra


def _targets(args) -> tuple[list[Vertex], list[int | None]]:
    if args.y is not None:
        return [Vertex(*args.y)], [None]
    if args.rect is not None:
        (a, b), (c, d) = args.rect
        ys = [Vertex(i, j) for i in range(a, b + 1) for j in range(c, d + 1)]
        return ys, [None] * len(ys)
    if args.sequence is not None:
        seq = _sequence(args)
        return list(seq.targets), list(args.k)
    return [Vertex(1, 0)], [None]


def _sequence(args) -> DirectionalSequence:
    if args.sequence == "parabolic":
        return DirectionalSequence.parabolic(args.lam, args.k)
    if args.sequence == "horizontal":
        return DirectionalSequence.horizontal(args.sign, args.k, args.height)
    return DirectionalSequence.cubic(args.sign, args.k)


def cmd_green(cfg: RunConfig, args):
    x = Vertex(*args.x)
    ys, _ = _targets(args)
    rows = []
    if args.route == "spectral":
        variant = _variant(cfg)
        q = QuadratureSpec(abs_tol=cfg.abs_tol)
        for y in ys:
            g = green_offaxis(x, y, variant, q)
            rows.append((y.x1, y.x2, g.value, g.error, "spectral"))
        note = "error: quadrature estimate"
    elif args.route == "oracle":
        full, _ = green_field(DEFAULT_KERNEL, x, cfg.horizon, mode="float", prune_tol=1e-30)
        quarter, _ = green_field(DEFAULT_KERNEL, x, max(cfg.horizon // 4, 1), mode="float",
                                 prune_tol=1e-30)
        for y in ys:
            v = float(full.get(y, 0.0))
            # the remaining tail decays like N^-1/2, so it is about the growth
            # over the last three quarters of the horizon
            tail = 2.0 * (v - float(quarter.get(y, 0.0)))
            rows.append((y.x1, y.x2, v, tail, "oracle"))
        note = "value: truncated sum (lower bound); error: extrapolated tail estimate"
    else:
        for i, y in enumerate(ys):
            est = estimate_green(DEFAULT_KERNEL, x, y, cfg.n_paths, cfg.horizon, cfg.seed + i)
            rows.append((y.x1, y.x2, est.value, 3.0 * est.stderr, "mc"))
        note = "value: truncated mean visit count; error: three standard errors"
    return ["y1", "y2", "value", "error", "route"], rows, {"note": note, "x": list(x)}


def cmd_martin(cfg: RunConfig, args):
    seq = _sequence(args) if args.sequence else DirectionalSequence.parabolic(0.0, args.k)
    (a, b), (c, d) = args.box
    variant = _variant(cfg)
    q = QuadratureSpec(abs_tol=cfg.abs_tol)
    rows = []
    for x1 in range(a, b + 1):
        for x2 in range(c, d + 1):
            for k, y in zip(args.k, seq.targets):
                kv = martin_kernel((x1, x2), y, cfg.horizon, variant, q, route="spectral")
                rows.append((x1, x2, k, y.x1, y.x2, kv.value, kv.error))
    return ["x1", "x2", "k", "y1", "y2", "K", "error"], rows, {"sequence": args.sequence or "parabolic",
                                                               "lam": seq.lam if seq.finite else str(seq.lam)}


def cmd_verify(cfg: RunConfig, args) -> tuple[str, bool]:
    from .verify import VerifyConfig, dumps, run

    vc = VerifyConfig(seed=cfg.seed, horizon=cfg.horizon, paths=cfg.n_paths, abs_tol=cfg.abs_tol,
                      variant=cfg.variant, phi_shift=args.inject_phi_shift)
    report = run(args.suite, vc)
    return dumps(report), report["passed"]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        if args.command == "verify":
            text, ok = cmd_verify(cfg, args)
            emit(cfg, text)
            return EXIT_OK if ok else EXIT_CHECK
        if args.command == "phi":
            cols, rows, extra = cmd_phi(cfg, args.grid)
        elif args.command == "green":
            cols, rows, extra = cmd_green(cfg, args)
        else:
            cols, rows, extra = cmd_martin(cfg, args)
        emit(cfg, render(cfg, cols, rows, extra))
        return EXIT_OK
    except (UsageError, ValueError, TypeError) as exc:
        print(f"orlat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceLimitError, QuadratureError, MemoryError) as exc:
        print(f"orlat: resource or convergence failure: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except RuntimeError as exc:
        print(f"orlat: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"orlat: I/O error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
