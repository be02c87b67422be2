"""Instance families, trial runner, sweeps and CSV reporting.

Families are written as compact strings such as ``zipf:2000:1.2`` or
``appendixA:2:4:0.4:01``; :func:`parse_family` turns them into
:class:`FamilySpec` objects and :meth:`FamilySpec.label` turns them back.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .dist_core import (
    ArgumentError,
    Distribution,
    OracleHandle,
    PiecewiseDistribution,
    QueryLedger,
    load_distribution,
    make_distribution,
    make_piecewise,
)
from .monotonicity import test_monotone
from .paircond_identity import pcond_id
from .primitives import Verdict
from .tolerant_identity import tolerant_id
from .tolerant_uniformity import tolerant_unif
from .truth import exact_dist_to_monotone, exact_tv

__all__ = [
    "ALGORITHMS",
    "CSV_HEADER",
    "TRUTH_MAX_N",
    "FamilySpec",
    "Uniform",
    "PointMass",
    "RandomSimplex",
    "Zipf",
    "ReversedZipf",
    "Staircase",
    "Paninski",
    "AppendixA",
    "HalfSupport",
    "FromFile",
    "Cell",
    "TrialReport",
    "parse_family",
    "generate",
    "run_trial",
    "run_sweep",
    "rows_to_csv",
    "amplify_median",
]

ALGORITHMS = ("tolerant-unif", "tolerant-id", "monotone", "paircond-id")
CSV_HEADER = ("algorithm", "family", "N", "eps", "seed", "output", "truth", "samp", "cond", "pcond", "wall_ms", "error")
TRUTH_MAX_N = 200

AnyDistribution = Distribution | PiecewiseDistribution


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


class FamilySpec:
    """Base class of the instance families."""

    name: str = ""

    def label(self) -> str:
        raise NotImplementedError

    def build(self) -> tuple[AnyDistribution, dict[str, Any]]:
        raise NotImplementedError


def _check_n(n: int) -> None:
    if n < 1:
        raise ArgumentError(f"N must be at least 1, got {n}")


def _bits(bits: Sequence[int] | str) -> tuple[int, ...]:
    values = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in values):
        raise ArgumentError(f"bits must be 0 or 1, got {bits!r}")
    return values


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Uniform(FamilySpec):
    n: int
    name = "uniform"

    def label(self) -> str:
        return f"uniform:{self.n}"

    def build(self):
        _check_n(self.n)
        return make_distribution(np.ones(self.n)), {}


@dataclass(frozen=True)
class PointMass(FamilySpec):
    n: int
    i: int
    name = "point"

    def label(self) -> str:
        return f"point:{self.n}:{self.i}"

    def build(self):
        _check_n(self.n)
        if not 1 <= self.i <= self.n:
            raise ArgumentError(f"point index must lie in 1..{self.n}")
        w = np.zeros(self.n)
        w[self.i - 1] = 1.0
        return make_distribution(w), {}


@dataclass(frozen=True)
class RandomSimplex(FamilySpec):
    """Uniform draw from the probability simplex (flat Dirichlet)."""

    n: int
    seed: int
    name = "simplex"

    def label(self) -> str:
        return f"simplex:{self.n}:{self.seed}"

    def build(self):
        _check_n(self.n)
        rng = np.random.default_rng(self.seed)
        return make_distribution(rng.dirichlet(np.ones(self.n))), {}


@dataclass(frozen=True)
class Zipf(FamilySpec):
    n: int
    s: float
    name = "zipf"

    def label(self) -> str:
        return f"zipf:{self.n}:{_fmt(self.s)}"

    def build(self):
        _check_n(self.n)
        if self.s < 0:
            raise ArgumentError("Zipf exponent must be non-negative")
        return make_distribution(np.arange(1, self.n + 1, dtype=np.float64) ** -self.s), {}


@dataclass(frozen=True)
class ReversedZipf(FamilySpec):
    n: int
    s: float
    name = "rzipf"

    def label(self) -> str:
        return f"rzipf:{self.n}:{_fmt(self.s)}"

    def build(self):
        _check_n(self.n)
        if self.s < 0:
            raise ArgumentError("Zipf exponent must be non-negative")
        return make_distribution(np.arange(self.n, 0, -1, dtype=np.float64) ** -self.s), {}


@dataclass(frozen=True)
class Staircase(FamilySpec):
    """``levels`` near-equal steps with weights ``1, 2, ..., levels`` (increasing)."""

    n: int
    levels: int
    name = "staircase"

    def label(self) -> str:
        return f"staircase:{self.n}:{self.levels}"

    def build(self):
        _check_n(self.n)
        if not 1 <= self.levels <= self.n:
            raise ArgumentError("levels must lie in 1..N")
        step = np.repeat(np.arange(1, self.levels + 1), np.diff(np.linspace(0, self.n, self.levels + 1).round().astype(int)))
        return make_distribution(step.astype(np.float64)), {}


@dataclass(frozen=True)
class Paninski(FamilySpec):
    """Pairs ``(2i-1, 2i)`` with masses ``((1 -+ eps_p) / 2m, (1 +- eps_p) / 2m)``.

    Bit ``s_i = 0`` puts ``1 - eps_p`` on the odd element, ``s_i = 1`` on the
    even one.  The distance to uniform is ``eps_p / 2``.
    """

    m: int
    eps_p: float
    s_bits: tuple[int, ...]
    name = "paninski"

    def label(self) -> str:
        return f"paninski:{self.m}:{_fmt(self.eps_p)}:{''.join(map(str, self.s_bits))}"

    def build(self):
        if self.m < 1 or len(self.s_bits) != self.m:
            raise ArgumentError("Paninski needs m >= 1 and exactly m bits")
        if not 0 <= self.eps_p <= 1:
            raise ArgumentError("eps_p must lie in [0, 1]")
        bits = np.asarray(_bits(self.s_bits))
        sign = np.where(bits == 0, -1.0, 1.0)
        odd = (1 + sign * self.eps_p) / (2 * self.m)
        even = (1 - sign * self.eps_p) / (2 * self.m)
        return make_distribution(np.column_stack([odd, even]).ravel()), {}


@dataclass(frozen=True)
class AppendixA(FamilySpec):
    """Lower-bound ensemble over blocks ``B_1..B_2R`` with ``|B_r| = K^r``.

    The reference puts mass ``1 / (2R)`` on every block, spread evenly.
    For each ``r``, bit ``s_r = 0`` scales block ``2r - 1`` by ``1 - eps_p``
    and block ``2r`` by ``1 + eps_p``; ``s_r = 1`` swaps the signs.  The
    member is at TV distance ``eps_p / 2`` from the reference.  Both are
    piecewise constant, so large ``N`` stays cheap.
    """

    R: int
    K: int
    eps_p: float
    s_bits: tuple[int, ...]
    name = "appendixA"

    def label(self) -> str:
        return f"appendixA:{self.R}:{self.K}:{_fmt(self.eps_p)}:{''.join(map(str, self.s_bits))}"

    def build(self):
        if self.R < 1 or self.K < 2 or len(self.s_bits) != self.R:
            raise ArgumentError("AppendixA needs R >= 1, K >= 2 and exactly R bits")
        if not 0 <= self.eps_p <= 1:
            raise ArgumentError("eps_p must lie in [0, 1]")
        lengths, member, reference = [], [], []
        for r, bit in enumerate(_bits(self.s_bits), start=1):
            for block, sign in ((2 * r - 1, -1.0), (2 * r, 1.0)):
                if bit == 1:
                    sign = -sign
                size = self.K**block
                base = 1.0 / (2 * self.R * size)
                lengths.append(size)
                reference.append(base)
                member.append((1 + sign * self.eps_p) * base)
        dstar = make_piecewise(lengths, reference)
        return make_piecewise(lengths, member), {"dstar": dstar}


@dataclass(frozen=True)
class HalfSupport(FamilySpec):
    """Uniform over the first ``ceil(N / 2)`` elements."""

    n: int
    name = "half"

    def label(self) -> str:
        return f"half:{self.n}"

    def build(self):
        _check_n(self.n)
        w = np.zeros(self.n)
        w[: (self.n + 1) // 2] = 1.0
        return make_distribution(w), {}


@dataclass(frozen=True)
class FromFile(FamilySpec):
    path: str
    name = "file"

    def label(self) -> str:
        return f"file:{self.path}"

    def build(self):
        try:
            return load_distribution(self.path), {}
        except OSError as exc:
            raise ArgumentError(f"cannot read {self.path}: {exc}") from exc


_PARSERS: dict[str, tuple[type, tuple[Callable[[str], Any], ...], tuple[Any, ...]]] = {
    # name: (class, argument converters, defaults for trailing arguments)
    "uniform": (Uniform, (int,), ()),
    "point": (PointMass, (int, int), (1,)),
    "simplex": (RandomSimplex, (int, int), (0,)),
    "zipf": (Zipf, (int, float), (1.0,)),
    "rzipf": (ReversedZipf, (int, float), (1.0,)),
    "staircase": (Staircase, (int, int), (4,)),
    "paninski": (Paninski, (int, float, _bits), ()),
    "appendixA": (AppendixA, (int, int, float, _bits), ()),
    "half": (HalfSupport, (int,), ()),
}

_TAKES_N = {"uniform", "point", "simplex", "zipf", "rzipf", "staircase", "half"}


def parse_family(text: str, n: int | None = None) -> FamilySpec:
    """Parse ``name:arg:arg...`` into a :class:`FamilySpec`.

    Families indexed by a domain size may omit it when ``n`` is given, and
    trailing arguments with defaults may be omitted.

    Examples
    --------
    >>> parse_family("zipf:2000:1.2")
    Zipf(n=2000, s=1.2)
    >>> parse_family("zipf", n=50)
    Zipf(n=50, s=1.0)
    """
    text = text.strip()
    if text.startswith("file:"):
        return FromFile(text[len("file:"):])
    name, *args = text.split(":")
    if name not in _PARSERS:
        raise ArgumentError(f"unknown family {name!r}; known: {sorted(_PARSERS) + ['file']}")
    cls, converters, defaults = _PARSERS[name]
    if name in _TAKES_N and n is not None and len(args) < len(converters) - len(defaults):
        args = [str(n)] + args
    missing = len(converters) - len(args)
    if missing < 0 or missing > len(defaults):
        raise ArgumentError(f"family {name!r} takes {len(converters)} arguments, got {len(args)}")
    try:
        values = [conv(a) for conv, a in zip(converters, args)]
    except ValueError as exc:
        raise ArgumentError(f"cannot parse family {text!r}: {exc}") from exc
    values += list(defaults[len(defaults) - missing:]) if missing else []
    return cls(*values)


def generate(spec: FamilySpec) -> tuple[AnyDistribution, dict[str, Any]]:
    """Build the distribution of a family and its metadata.

    ``AppendixA`` metadata carries the reference under ``"dstar"``.
    """
    return spec.build()


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    """One grid point of a sweep.

    Parameters
    ----------
    family : FamilySpec or str
    algorithm : str
        One of :data:`ALGORITHMS`.
    eps : float
    dstar : FamilySpec or str, optional
        Reference for the identity testers; AppendixA families default to
        their own reference.
    """

    family: FamilySpec | str
    algorithm: str
    eps: float
    dstar: FamilySpec | str | None = None


@dataclass(frozen=True)
class TrialReport:
    """Outcome of a single trial.

    ``wall_time_ms`` is excluded from equality so that reruns compare equal.
    """

    family: str
    algorithm: str
    n: int | None
    eps: float
    seed: int
    output: Verdict | float | None
    truth: float | None
    ledger: QueryLedger
    wall_time_ms: int = field(default=0, compare=False)
    error: str = ""

    def row(self, timing: bool = True) -> list[str]:
        if isinstance(self.output, Verdict):
            out = str(self.output)
        elif self.output is None:
            out = ""
        else:
            out = _fmt(self.output)
        return [
            self.algorithm,
            self.family,
            "" if self.n is None else str(self.n),
            _fmt(self.eps),
            str(self.seed),
            out,
            "" if self.truth is None else _fmt(self.truth),
            str(self.ledger.samp_count),
            str(self.ledger.cond_count),
            str(self.ledger.pcond_count),
            str(self.wall_time_ms if timing else 0),
            self.error,
        ]


def _as_spec(value: FamilySpec | str, n: int | None = None) -> FamilySpec:
    return value if isinstance(value, FamilySpec) else parse_family(value, n)


def _reference(cell: Cell, meta: dict[str, Any], n: int) -> AnyDistribution:
    if cell.dstar is not None:
        dstar, _ = generate(_as_spec(cell.dstar, n))
    elif "dstar" in meta:
        dstar = meta["dstar"]
    else:
        raise ArgumentError(f"{cell.algorithm} needs a reference distribution (dstar)")
    if dstar.n != n:
        raise ArgumentError(f"reference has N={dstar.n} but the family has N={n}")
    return dstar


def _truth(algorithm: str, dist: AnyDistribution, dstar: AnyDistribution | None) -> float | None:
    if dist.n > TRUTH_MAX_N:
        return None
    if algorithm == "tolerant-unif":
        return exact_tv(dist, np.full(dist.n, 1.0 / dist.n))
    if algorithm == "monotone":
        return exact_dist_to_monotone(dist).optimum
    return exact_tv(dist, dstar)


def run_trial(
    spec: FamilySpec | str,
    algorithm: str,
    eps: float,
    seed: int,
    cfg: Config | None = None,
    dstar: FamilySpec | str | None = None,
) -> TrialReport:
    """Run one algorithm on a fresh handle seeded with ``seed``.

    Errors propagate; :func:`run_sweep` records them as rows instead.
    """
    cfg = cfg or DEFAULT_CONFIG
    if algorithm not in ALGORITHMS:
        raise ArgumentError(f"unknown algorithm {algorithm!r}; known: {ALGORITHMS}")
    family = _as_spec(spec)
    dist, meta = generate(family)
    cell = Cell(family, algorithm, eps, dstar)
    reference = _reference(cell, meta, dist.n) if algorithm in ("tolerant-id", "paircond-id") else None
    handle = OracleHandle(dist, seed=seed, cfg=cfg)
    start = time.perf_counter()
    output: Verdict | float
    if algorithm == "tolerant-unif":
        output = float(tolerant_unif(handle, eps, cfg))
    elif algorithm == "tolerant-id":
        dense = reference.to_dense()
        output = float(tolerant_id(handle, dense, eps, cfg))
    elif algorithm == "monotone":
        output = test_monotone(handle, eps, cfg)
    else:
        output = pcond_id(handle, reference, eps, cfg)
    wall = int(round((time.perf_counter() - start) * 1000))
    return TrialReport(
        family=family.label(),
        algorithm=algorithm,
        n=dist.n,
        eps=float(eps),
        seed=int(seed),
        output=output,
        truth=_truth(algorithm, dist, reference),
        ledger=handle.ledger.snapshot(),
        wall_time_ms=wall,
    )


def _safe_trial(args: tuple) -> TrialReport:
    cell, seed, cfg = args
    try:
        return run_trial(cell.family, cell.algorithm, cell.eps, seed, cfg, cell.dstar)
    except Exception as exc:  # recorded, the sweep continues
        label = cell.family.label() if isinstance(cell.family, FamilySpec) else str(cell.family)
        return TrialReport(
            family=label,
            algorithm=cell.algorithm,
            n=None,
            eps=float(cell.eps),
            seed=int(seed),
            output=None,
            truth=None,
            ledger=QueryLedger(),
            error=f"{type(exc).__name__}: {exc}",
        )


def run_sweep(
    grid: Sequence[Cell | tuple],
    trials_per_cell: int,
    base_seed: int = 0,
    cfg: Config | None = None,
    workers: int = 1,
) -> list[TrialReport]:
    """Run every cell with seeds ``base_seed + 0 .. trials_per_cell - 1``.

    Parameters
    ----------
    grid : sequence of Cell or ``(family, algorithm, eps[, dstar])`` tuples
    trials_per_cell : int
    base_seed : int
    cfg : Config, optional
    workers : int
        Worker processes; results do not depend on this value.

    Returns
    -------
    list of TrialReport
        Sorted by ``(algorithm, family, eps, seed)``.
    """
    if not grid:
        raise ArgumentError("sweep grid must be non-empty")
    if trials_per_cell < 1:
        raise ArgumentError("trials_per_cell must be at least 1")
    cfg = cfg or DEFAULT_CONFIG
    cells = [c if isinstance(c, Cell) else Cell(*c) for c in grid]
    jobs = [(cell, base_seed + t, cfg) for cell in cells for t in range(trials_per_cell)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_safe_trial, jobs))
    else:
        reports = [_safe_trial(job) for job in jobs]
    return sorted(reports, key=lambda r: (r.algorithm, r.family, r.eps, r.seed))


def rows_to_csv(reports: Sequence[TrialReport], path: str | Path | None = None, timing: bool = True) -> str:
    """Render reports as CSV text, optionally writing it to ``path``.

    With ``timing=False`` the ``wall_ms`` column is written as 0 so that
    reruns with the same seeds produce identical bytes.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for report in reports:
        writer.writerow(report.row(timing))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def amplify_median(reports: Sequence[TrialReport]) -> float:
    """Median of the estimates; the mean of the middle two for even counts."""
    if not reports:
        raise ArgumentError("need at least one report")
    values = []
    for report in reports:
        if isinstance(report.output, Verdict) or report.output is None:
            raise ArgumentError("amplify_median needs estimate-type reports")
        values.append(float(report.output))
    return float(statistics.median(values))
