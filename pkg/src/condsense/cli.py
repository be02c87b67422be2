"""Command-line entry point ``condsense``.

Exit codes: 0 on success, 2 on argument errors, 3 when some trial failed.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import DEFAULT_CONFIG, Config, ConfigError
from .dist_core import ArgumentError
from .harness import ALGORITHMS, Cell, FromFile, generate, parse_family, rows_to_csv, run_sweep
from .truth import LP_MAX_N, exact_dist_to_monotone, exact_tv

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_TRIALS = 3


def _common(parser: argparse.ArgumentParser, sweep: bool = False) -> None:
    parser.add_argument("--n", type=int, default=None, help="domain size for families that take one")
    if sweep:
        parser.add_argument("--family", action="append", required=True, help="family spec; repeatable")
        parser.add_argument("--algorithm", action="append", choices=ALGORITHMS, required=True, help="repeatable")
        parser.add_argument("--eps", type=float, action="append", required=True, help="repeatable")
        parser.add_argument("--workers", type=int, default=1)
    else:
        parser.add_argument("--family", default=None, help="family spec, e.g. zipf:2000:1.2 (default uniform:N)")
        parser.add_argument("--eps", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0, help="seed of the first trial")
    parser.add_argument("--trials", type=int, default=1)
    parser.add_argument("--dstar", default=None, help="reference distribution file or family spec")
    parser.add_argument("--config", default=None, help="key = value file overriding Config fields")
    parser.add_argument("--out", default=None, help="CSV output path (default stdout)")
    parser.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condsense", description="Conditional-sampling distribution testers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ALGORITHMS:
        _common(sub.add_parser(name, help=f"run {name} trials"))
    _common(sub.add_parser("sweep", help="run a grid of families x algorithms x eps"), sweep=True)
    truth = sub.add_parser("truth", help="exact reference quantities for a family")
    truth.add_argument("--family", default=None)
    truth.add_argument("--n", type=int, default=None)
    truth.add_argument("--dstar", default=None)
    return parser


def _load_config(path: str | None) -> Config:
    return DEFAULT_CONFIG if path is None else Config.from_file(path)


def _family_text(text: str | None, n: int | None) -> str:
    if text is not None:
        return text
    if n is None:
        raise ArgumentError("give --family or --n")
    return f"uniform:{n}"


def _reference_spec(text: str | None, n: int | None):
    if text is None:
        return None
    if Path(text).exists():
        return FromFile(text)
    return parse_family(text, n)


def _run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    dstar = _reference_spec(args.dstar, args.n)
    if args.command == "sweep":
        families = [parse_family(f, args.n) for f in args.family]
        grid = [Cell(f, a, e, dstar) for f, a, e in itertools.product(families, args.algorithm, args.eps)]
        workers = args.workers
    else:
        family = parse_family(_family_text(args.family, args.n), args.n)
        grid = [Cell(family, args.command, args.eps, dstar)]
        workers = 1
    reports = run_sweep(grid, args.trials, base_seed=args.seed, cfg=cfg, workers=workers)
    text = rows_to_csv(reports, args.out, timing=not args.no_timing)
    if args.out is None:
        sys.stdout.write(text)
    failed = [r for r in reports if r.error]
    for r in failed:
        print(f"trial error ({r.algorithm}, {r.family}, seed {r.seed}): {r.error}", file=sys.stderr)
    return EXIT_TRIALS if failed else EXIT_OK


def _truth(args: argparse.Namespace) -> int:
    family = parse_family(_family_text(args.family, args.n), args.n)
    dist, meta = generate(family)
    dense = dist.to_dense()
    lines = [f"family={family.label()}", f"N={dense.n}"]
    lines.append(f"tv_to_uniform={exact_tv(dense, np.full(dense.n, 1.0 / dense.n))!r}")
    if dense.n <= LP_MAX_N:
        lines.append(f"dist_to_monotone={exact_dist_to_monotone(dense).optimum!r}")
    ref_spec = _reference_spec(args.dstar, args.n)
    reference = generate(ref_spec)[0] if ref_spec is not None else meta.get("dstar")
    if reference is not None:
        lines.append(f"tv_to_dstar={exact_tv(dense, reference.to_dense())!r}")
    print("\n".join(lines))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "truth":
            return _truth(args)
        return _run(args)
    except (ArgumentError, ConfigError) as exc:
        print(f"condsense: error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
