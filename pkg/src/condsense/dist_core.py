"""Finite distributions and a simulated SAMP / COND / PAIRCOND oracle.

Elements are 1-based integers throughout the public interface.  An
:class:`OracleHandle` owns the hidden target distribution, a query ledger
and a seeded random generator.  Views over the handle (:class:`SubsetView`,
:class:`BlockView`) expose conditional distributions of the target while
charging every simulated oracle call to the handle's ledger.

Several methods simulate a batch of oracle calls in one step, for example
``pair_counts`` draws the number of times ``x`` is returned by ``reps``
PAIRCOND calls as one binomial variate.  These batched draws have exactly the
distribution of the corresponding sequence of individual calls and are
charged as that many calls.
"""

from __future__ import annotations

import contextlib
import math
import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .config import DEFAULT_CONFIG, Config

__all__ = [
    "ArgumentError",
    "ZeroMassError",
    "Distribution",
    "PiecewiseDistribution",
    "QueryLedger",
    "OracleHandle",
    "SubsetView",
    "BlockView",
    "make_distribution",
    "make_piecewise",
    "restrict",
    "samp",
    "cond",
    "pcond",
    "load_distribution",
    "save_distribution",
]

NORMALIZATION_TOL = 1e-9


_FAR_TAIL_LOG = math.log(2e15)


class ArgumentError(ValueError):
    """A precondition on the arguments of an operation is violated."""


class ZeroMassError(ValueError):
    """A conditional query was issued on a set of total probability zero."""


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Distribution:
    """Explicit probability table over ``[N]``.

    Parameters
    ----------
    probs : np.ndarray
        Probability of element ``i`` stored at position ``i - 1``.
    cumulative : np.ndarray
        Prefix sums of ``probs`` used for inverse-CDF sampling.
    index_map : np.ndarray or None
        For distributions produced by :func:`restrict`, the original element
        behind each re-indexed element.
    """

    probs: np.ndarray
    cumulative: np.ndarray
    index_map: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.probs.shape[0])

    def prob(self, i: int) -> float:
        """Mass of a single element."""
        return float(self.probs[i - 1])

    def mass(self, items: np.ndarray | Sequence[int]) -> np.ndarray:
        """Masses of an array of elements."""
        return self.probs[np.asarray(items, dtype=np.int64) - 1]

    def range_mass(self, lo: int, hi: int) -> float:
        """Total mass of the contiguous range ``lo..hi`` (inclusive)."""
        if hi < lo:
            return 0.0
        upper = self.cumulative[hi - 1]
        lower = self.cumulative[lo - 2] if lo >= 2 else 0.0
        return float(max(upper - lower, 0.0))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` independent elements."""
        u = rng.random(size) * self.cumulative[-1]
        idx = np.searchsorted(self.cumulative, u, side="right")
        return np.minimum(idx, self.n - 1).astype(np.int64) + 1

    def to_dense(self) -> "Distribution":
        return self


def _normalize(weights: np.ndarray) -> np.ndarray:
    if weights.ndim != 1 or weights.size == 0:
        raise ArgumentError("weights must be a non-empty one-dimensional sequence")
    if not np.all(np.isfinite(weights)):
        raise ArgumentError("weights must be finite")
    if np.any(weights < 0):
        raise ArgumentError("weights must be non-negative")
    total = weights.sum()
    if total <= 0:
        raise ArgumentError("at least one weight must be positive")
    return weights / total


def make_distribution(weights: Sequence[float] | np.ndarray) -> Distribution:
    """Normalize non-negative weights into a :class:`Distribution`.

    Parameters
    ----------
    weights : sequence of float
        Non-negative weights, at least one of them positive.

    Returns
    -------
    Distribution
        The normalized distribution with its cumulative index.
    """
    probs = _normalize(np.asarray(weights, dtype=np.float64).copy())
    cumulative = np.cumsum(probs)
    probs.setflags(write=False)
    cumulative.setflags(write=False)
    return Distribution(probs=probs, cumulative=cumulative)


@dataclass(frozen=True, eq=False)
class PiecewiseDistribution:
    """Distribution that is constant on consecutive runs of elements.

    Used for very large domains where an explicit table does not fit in
    memory.  Run ``r`` covers elements ``starts[r] .. starts[r] + lengths[r] - 1``
    and gives each of them mass ``masses[r]``.
    """

    starts: np.ndarray
    lengths: np.ndarray
    masses: np.ndarray
    run_cumulative: np.ndarray

    @property
    def n(self) -> int:
        return int(self.starts[-1] + self.lengths[-1] - 1)

    def _run_of(self, items: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.starts, items, side="right") - 1

    def prob(self, i: int) -> float:
        return float(self.mass(np.array([i]))[0])

    def mass(self, items: np.ndarray | Sequence[int]) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        return self.masses[self._run_of(items)]

    def range_mass(self, lo: int, hi: int) -> float:
        if hi < lo:
            return 0.0
        return self._prefix_mass(hi) - self._prefix_mass(lo - 1)

    def _prefix_mass(self, i: int) -> float:
        if i <= 0:
            return 0.0
        run = int(self._run_of(np.array([i]))[0])
        before = self.run_cumulative[run - 1] if run > 0 else 0.0
        return float(before + (i - self.starts[run] + 1) * self.masses[run])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self.run_cumulative[-1]
        run = np.minimum(np.searchsorted(self.run_cumulative, u, side="right"), len(self.starts) - 1)
        offset = rng.integers(0, self.lengths[run])
        return (self.starts[run] + offset).astype(np.int64)

    def runs(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(start, length, mass_per_element)`` for every run."""
        for s, l, m in zip(self.starts, self.lengths, self.masses):
            yield int(s), int(l), float(m)

    def to_dense(self) -> Distribution:
        return make_distribution(np.repeat(self.masses, self.lengths))


def make_piecewise(lengths: Sequence[int], weights: Sequence[float]) -> PiecewiseDistribution:
    """Build a piecewise-constant distribution from runs.

    Parameters
    ----------
    lengths : sequence of int
        Number of elements in each run, all positive.
    weights : sequence of float
        Non-negative weight given to every element of the corresponding run.
    """
    lengths_arr = np.asarray(lengths, dtype=np.int64)
    weights_arr = np.asarray(weights, dtype=np.float64)
    if lengths_arr.shape != weights_arr.shape or lengths_arr.size == 0:
        raise ArgumentError("lengths and weights must be non-empty and of equal length")
    if np.any(lengths_arr <= 0):
        raise ArgumentError("run lengths must be positive")
    run_weights = _normalize(lengths_arr * weights_arr)
    masses = run_weights / lengths_arr
    starts = np.concatenate(([1], 1 + np.cumsum(lengths_arr)[:-1])).astype(np.int64)
    return PiecewiseDistribution(
        starts=starts, lengths=lengths_arr, masses=masses, run_cumulative=np.cumsum(run_weights)
    )


def restrict(dist: Distribution, S: Sequence[int] | np.ndarray) -> Distribution:
    """Conditional distribution of ``dist`` given membership in ``S``.

    Parameters
    ----------
    dist : Distribution
        Source distribution.
    S : sequence of int
        Elements to keep; the result re-indexes them ``1..|S|`` in the given
        order and records the original elements in ``index_map``.

    Returns
    -------
    Distribution
    """
    items = _as_items(S, dist.n)
    weights = dist.mass(items)
    if weights.sum() <= 0:
        raise ZeroMassError("cannot restrict to a set of zero mass")
    out = make_distribution(weights)
    base = items if dist.index_map is None else dist.index_map[items - 1]
    base = base.copy()
    base.setflags(write=False)
    return Distribution(probs=out.probs, cumulative=out.cumulative, index_map=base)


def _as_items(S: Sequence[int] | np.ndarray, n: int) -> np.ndarray:
    items = np.asarray(S, dtype=np.int64).ravel()
    if items.size == 0:
        raise ArgumentError("element set must be non-empty")
    if items.min() < 1 or items.max() > n:
        raise ArgumentError(f"elements must lie in 1..{n}")
    if np.unique(items).size != items.size:
        raise ArgumentError("element set must not contain duplicates")
    return items


def load_distribution(path: str | Path) -> Distribution:
    """Load a distribution from CSV (header ``index,prob``) or a JSON array."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        values = json.loads(text)
        if not isinstance(values, list):
            raise ArgumentError("JSON distribution must be an array of reals")
        return make_distribution(np.asarray(values, dtype=np.float64))
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "index,prob":
        raise ArgumentError("CSV distribution must start with header 'index,prob'")
    indices, probs = [], []
    for ln in lines[1:]:
        i, p = ln.split(",")
        indices.append(int(i))
        probs.append(float(p))
    if indices != list(range(1, len(indices) + 1)):
        raise ArgumentError("CSV indices must be contiguous starting at 1")
    return make_distribution(np.asarray(probs))


def save_distribution(dist: Distribution, path: str | Path) -> None:
    """Write a distribution as CSV with header ``index,prob``."""
    rows = ["index,prob"] + [f"{i},{p!r}" for i, p in enumerate(dist.probs.tolist(), start=1)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


@dataclass
class QueryLedger:
    """Per-oracle-type call counters."""

    samp_count: int = 0
    cond_count: int = 0
    pcond_count: int = 0

    def charge(self, kind: str, count: int) -> None:
        if count < 0:
            raise ArgumentError("cannot charge a negative number of calls")
        if kind == "samp":
            self.samp_count += int(count)
        elif kind == "cond":
            self.cond_count += int(count)
        elif kind == "pcond":
            self.pcond_count += int(count)
        else:
            raise ArgumentError(f"unknown oracle kind {kind!r}")

    @property
    def total(self) -> int:
        return self.samp_count + self.cond_count + self.pcond_count

    def snapshot(self) -> "QueryLedger":
        return QueryLedger(self.samp_count, self.cond_count, self.pcond_count)


# ---------------------------------------------------------------------------
# Oracle access
# ---------------------------------------------------------------------------


class _Access:
    """Oracle access to some distribution derived from a handle's target.

    Subclasses define the local domain ``1..n``, the unnormalized mass of
    local elements and which ledger counters their draws and two-element
    conditional queries are charged to.
    """

    sample_kind: str = "samp"
    pair_kind: str = "pcond"

    handle: "OracleHandle"

    @property
    def n(self) -> int:
        raise NotImplementedError

    @property
    def rng(self) -> np.random.Generator:
        return self.handle.rng

    @property
    def cfg(self) -> Config:
        return self.handle.cfg

    def _weights(self, items: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _draw(self, size: int) -> np.ndarray:
        raise NotImplementedError

    def _all_weights(self) -> np.ndarray:
        return self._weights(np.arange(1, self.n + 1))

    def _charge(self, kind: str, count: int) -> None:
        self.handle.ledger.charge(kind, count)

    # -- sampling ---------------------------------------------------------

    def sample(self, size: int | None = None) -> int | np.ndarray:
        """Draw from the distribution (one oracle call per draw)."""
        if size is None:
            self._charge(self.sample_kind, 1)
            return int(self._draw(1)[0])
        self._charge(self.sample_kind, size)
        return self._draw(size)

    def sample_counts(self, size: int) -> np.ndarray:
        """Histogram of ``size`` draws as a dense array over ``1..n``."""
        self._charge(self.sample_kind, size)
        weights = self._all_weights()
        return self.rng.multinomial(size, weights / weights.sum())

    def count_in(self, items: np.ndarray | Sequence[int], size: int) -> int:
        """Number of ``size`` draws that land in ``items``."""
        items = np.asarray(items, dtype=np.int64)
        self._charge(self.sample_kind, size)
        total = self._all_weights().sum()
        inside = self._weights(items).sum() if items.size else 0.0
        p = min(max(inside / total, 0.0), 1.0)
        return int(self.rng.binomial(size, p))

    def cond_sample(self, items: np.ndarray | Sequence[int], size: int | None = None) -> int | np.ndarray:
        """COND query on a subset of the local domain."""
        items = _as_items(items, self.n)
        cumulative = self.handle._cached_cumulative(self, items)
        count = 1 if size is None else size
        self._charge("cond", count)
        u = self.rng.random(count) * cumulative[-1]
        idx = np.minimum(np.searchsorted(cumulative, u, side="right"), items.size - 1)
        out = items[idx]
        return int(out[0]) if size is None else out

    # -- two-element conditioning -----------------------------------------

    def _pair_probability(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if np.any(xs == ys):
            raise ArgumentError("pair queries need two distinct elements")
        for arr in (xs, ys):
            if arr.size and (arr.min() < 1 or arr.max() > self.n):
                raise ArgumentError(f"elements must lie in 1..{self.n}")
        wx = self._weights(xs)
        wy = self._weights(ys)
        total = wx + wy
        if np.any(total <= 0):
            raise ZeroMassError("pair query on two zero-mass elements")
        return wx / total

    def pair(self, x: int, y: int) -> int:
        """A single two-element conditional query."""
        p = self._pair_probability(np.array([x]), np.array([y]))[0]
        self._charge(self.pair_kind, 1)
        return x if self.rng.random() < p else y

    def pair_counts(self, xs: np.ndarray, ys: np.ndarray, reps: int | np.ndarray) -> np.ndarray:
        """Times ``x`` is returned by ``reps`` pair queries on ``{x, y}``, per pair."""
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        reps_arr = np.broadcast_to(np.asarray(reps, dtype=np.int64), xs.shape)
        p = self._pair_probability(xs, ys)
        self._charge(self.pair_kind, int(reps_arr.sum()))
        return self.rng.binomial(reps_arr, p)

    def pair_window_hits(
        self,
        xs: np.ndarray,
        ys: np.ndarray,
        reps: int | np.ndarray,
        batches: int | np.ndarray,
        lo: int | np.ndarray,
        hi: int | np.ndarray,
    ) -> np.ndarray:
        """Run ``batches`` independent batches of ``reps`` pair queries per pair.

        Returns, per pair, how many batches returned ``x`` between ``lo`` and
        ``hi`` times (inclusive).
        """
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        shape = xs.shape
        reps_arr = np.broadcast_to(np.asarray(reps, dtype=np.int64), shape)
        batches_arr = np.broadcast_to(np.asarray(batches, dtype=np.int64), shape)
        lo_arr = np.broadcast_to(np.asarray(lo, dtype=np.int64), shape)
        hi_arr = np.broadcast_to(np.asarray(hi, dtype=np.int64), shape)
        p = self._pair_probability(xs, ys)
        self._charge(self.pair_kind, int((reps_arr * batches_arr).sum()))
        # Hoeffding: a count range farther than `reach` from the mean has
        # probability below 1e-15; such pairs are treated as misses.
        mean = reps_arr * p
        reach = np.sqrt(reps_arr * _FAR_TAIL_LOG / 2.0)
        near = (hi_arr >= lo_arr) & (lo_arr - reach <= mean) & (mean <= hi_arr + reach)
        inside = np.zeros(shape, dtype=np.float64)
        if np.any(near):
            pn, rn = p[near], reps_arr[near]
            vals = stats.binom.cdf(hi_arr[near], rn, pn) - stats.binom.cdf(lo_arr[near] - 1, rn, pn)
            inside[near] = np.clip(vals, 0.0, 1.0)
        return self.rng.binomial(batches_arr, inside)

    def geometric_sums(
        self,
        numerators: np.ndarray,
        denominators: np.ndarray,
        caps: int | np.ndarray,
        draws: int | np.ndarray,
    ) -> np.ndarray:
        """Sums of capped geometric counts, per pair.

        Each draw repeats the pair query on ``{numerator, denominator}`` and
        counts ``numerator`` returns before the first ``denominator``; the
        count stops at ``cap``.  Returns the sum over ``draws`` draws.

        Pairs with at most ``cfg.geometric_exact_draws`` draws are simulated
        draw by draw.  Larger batches draw the number of capped draws as a
        binomial and the remaining sum as a negative binomial, which differs
        from the exact law only through the event that an uncapped draw
        exceeds the cap (probability at most ``draws * P(G >= cap)``).
        """
        nums = np.asarray(numerators, dtype=np.int64)
        dens = np.asarray(denominators, dtype=np.int64)
        shape = nums.shape
        caps_arr = np.broadcast_to(np.asarray(caps, dtype=np.int64), shape)
        draws_arr = np.broadcast_to(np.asarray(draws, dtype=np.int64), shape)
        if np.any(caps_arr < 1):
            raise ArgumentError("cap must be at least 1")
        p_num = self._pair_probability(nums, dens)
        if np.any(self._weights(dens) <= 0):
            raise ArgumentError("denominator must have positive mass")
        p_stop = 1.0 - p_num
        totals = np.zeros(shape, dtype=np.int64)
        calls = 0
        small = draws_arr <= self.cfg.geometric_exact_draws
        idx_small = np.flatnonzero(small & (draws_arr > 0))
        if idx_small.size:
            rep = np.repeat(idx_small, draws_arr[idx_small])
            g = self.rng.geometric(p_stop[rep]) - 1
            capped = np.minimum(g, caps_arr[rep])
            calls += int(np.where(g < caps_arr[rep], g + 1, caps_arr[rep]).sum())
            totals[idx_small] = np.bincount(
                np.searchsorted(idx_small, rep), weights=capped, minlength=idx_small.size
            ).astype(np.int64)
        idx_big = np.flatnonzero(~small)
        if idx_big.size:
            d = draws_arr[idx_big]
            ps = p_stop[idx_big]
            cap = caps_arr[idx_big]
            with np.errstate(divide="ignore"):
                p_exceed = np.exp(cap * np.log1p(-ps))
            n_exceed = self.rng.binomial(d, p_exceed)
            rest = d - n_exceed
            rest_sum = np.zeros(idx_big.size, dtype=np.int64)
            live = (rest > 0) & (ps < 1)
            if np.any(live):
                rest_sum[live] = self.rng.negative_binomial(rest[live], ps[live])
            totals[idx_big] = rest_sum + n_exceed * cap
            calls += int((rest_sum + rest + n_exceed * cap).sum())
        self._charge(self.pair_kind, calls)
        return totals


class OracleHandle(_Access):
    """Access point to a hidden target distribution.

    Parameters
    ----------
    target : Distribution or PiecewiseDistribution
        The distribution being tested.
    seed : int
        Master seed.
    ordinal : int
        Handle number; the generator is seeded with ``seed XOR ordinal``.
    cfg : Config, optional
        Constants, including the COND cache capacity.
    """

    sample_kind = "samp"
    pair_kind = "pcond"

    def __init__(
        self,
        target: Distribution | PiecewiseDistribution,
        seed: int = 0,
        ordinal: int = 0,
        cfg: Config | None = None,
    ) -> None:
        self.target = target
        self.ledger = QueryLedger()
        self.seed = int(seed)
        self.ordinal = int(ordinal)
        self._rng = np.random.default_rng(self.seed ^ self.ordinal)
        self._cfg = cfg if cfg is not None else DEFAULT_CONFIG
        self._cache: OrderedDict[tuple[int, bytes], np.ndarray] = OrderedDict()
        self.handle = self

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def rng(self) -> np.random.Generator:
        return self._rng

    @property
    def cfg(self) -> Config:
        return self._cfg

    def _weights(self, items: np.ndarray) -> np.ndarray:
        return self.target.mass(items)

    def _draw(self, size: int) -> np.ndarray:
        return self.target.sample(self._rng, size)

    def _all_weights(self) -> np.ndarray:
        if isinstance(self.target, Distribution):
            return self.target.probs
        return self.target.to_dense().probs

    def count_in(self, items: np.ndarray | Sequence[int], size: int) -> int:
        items = np.asarray(items, dtype=np.int64)
        self._charge(self.sample_kind, size)
        inside = float(self.target.mass(items).sum()) if items.size else 0.0
        return int(self._rng.binomial(size, min(max(inside, 0.0), 1.0)))

    @contextlib.contextmanager
    def substream(self) -> Iterator[None]:
        """Temporarily switch to an independent child random stream."""
        parent = self._rng
        self._rng = parent.spawn(1)[0]
        try:
            yield
        finally:
            self._rng = parent

    def _cached_cumulative(self, view: _Access, items: np.ndarray) -> np.ndarray:
        key = (id(view), items.tobytes())
        cached = self._cache.get(key)
        if cached is not None:
            self._cache.move_to_end(key)
            return cached
        weights = view._weights(items)
        if weights.sum() <= 0:
            raise ZeroMassError("COND query on a set of zero mass")
        cumulative = np.cumsum(weights)
        self._cache[key] = cumulative
        while len(self._cache) > self._cfg.cond_cache_size:
            self._cache.popitem(last=False)
        return cumulative


class SubsetView(_Access):
    """The target conditioned on a subset, re-indexed ``1..len(items)``.

    Draws are COND queries on the subset and two-element queries are
    PAIRCOND queries on the underlying elements.
    """

    sample_kind = "cond"
    pair_kind = "pcond"

    def __init__(self, handle: OracleHandle, items: np.ndarray | Sequence[int]) -> None:
        self.handle = handle
        self.items = _as_items(items, handle.n)
        self._item_weights = handle.target.mass(self.items)
        total = self._item_weights.sum()
        if total <= 0:
            raise ZeroMassError("view over a set of zero mass")
        self._cumulative = np.cumsum(self._item_weights)

    @property
    def n(self) -> int:
        return int(self.items.size)

    def base_elements(self, local: np.ndarray | Sequence[int]) -> np.ndarray:
        return self.items[np.asarray(local, dtype=np.int64) - 1]

    def _weights(self, items: np.ndarray) -> np.ndarray:
        return self._item_weights[np.asarray(items, dtype=np.int64) - 1]

    def _all_weights(self) -> np.ndarray:
        return self._item_weights

    def _draw(self, size: int) -> np.ndarray:
        u = self.rng.random(size) * self._cumulative[-1]
        idx = np.minimum(np.searchsorted(self._cumulative, u, side="right"), self.n - 1)
        return idx.astype(np.int64) + 1


class BlockView(_Access):
    """Distribution over blocks of the target: block ``b`` has mass ``D(B_b)``.

    Blocks are disjoint sets of base elements.  A draw is a COND query on
    the union of the blocks followed by locating the block; a two-block
    query is a COND query on the union of the two blocks.
    """

    sample_kind = "cond"
    pair_kind = "cond"

    def __init__(self, handle: OracleHandle, block_masses: np.ndarray, blocks: Sequence[np.ndarray] | None = None):
        self.handle = handle
        self.blocks = blocks
        self._block_weights = np.asarray(block_masses, dtype=np.float64)
        if self._block_weights.sum() <= 0:
            raise ZeroMassError("block view with zero total mass")
        self._cumulative = np.cumsum(self._block_weights)

    @classmethod
    def from_sets(cls, handle: OracleHandle, blocks: Sequence[np.ndarray | Sequence[int]]) -> "BlockView":
        arrays = [np.asarray(b, dtype=np.int64) for b in blocks]
        masses = np.array([handle.target.mass(b).sum() for b in arrays])
        return cls(handle, masses, arrays)

    @classmethod
    def from_intervals(cls, handle: OracleHandle, bounds: Sequence[tuple[int, int]]) -> "BlockView":
        """Blocks given as inclusive ranges ``(lo, hi)`` of base elements."""
        masses = np.array([handle.target.range_mass(lo, hi) for lo, hi in bounds])
        return cls(handle, masses, None)

    @property
    def n(self) -> int:
        return int(self._block_weights.size)

    def _weights(self, items: np.ndarray) -> np.ndarray:
        return self._block_weights[np.asarray(items, dtype=np.int64) - 1]

    def _all_weights(self) -> np.ndarray:
        return self._block_weights

    def _draw(self, size: int) -> np.ndarray:
        u = self.rng.random(size) * self._cumulative[-1]
        idx = np.minimum(np.searchsorted(self._cumulative, u, side="right"), self.n - 1)
        return idx.astype(np.int64) + 1


# ---------------------------------------------------------------------------
# Single-call operations
# ---------------------------------------------------------------------------


def samp(handle: _Access) -> int:
    """One SAMP query (a COND query on the whole domain for views)."""
    return int(handle.sample())


def cond(handle: _Access, S: Sequence[int] | np.ndarray) -> int:
    """One COND query on the set ``S`` of local elements."""
    return int(handle.cond_sample(S))


def pcond(handle: _Access, x: int, y: int) -> int:
    """One PAIRCOND query: ``x`` with probability ``D(x) / (D(x) + D(y))``."""
    return handle.pair(int(x), int(y))
