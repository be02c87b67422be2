"""Shared estimation primitives.

* :func:`compare` estimates a mass ratio ``D(x) / D(y)`` from repeated
  two-element conditional queries.
* :func:`geometric_count` is the unbiased ratio estimator that counts
  ``numerator`` returns before the first ``denominator`` return.
* :func:`dyadic_levels` enumerates the grid of dyadic ``(alpha, beta)`` pairs
  that the "some level has enough mass" arguments iterate over.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Union

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .dist_core import ArgumentError, _Access

__all__ = [
    "INFINITY",
    "Verdict",
    "CompareResult",
    "DyadicLevel",
    "EmptyGridError",
    "compare",
    "compare_many",
    "compare_reps",
    "compare_window_hits",
    "count_window",
    "geometric_cap",
    "geometric_count",
    "dyadic_levels",
    "reverse_markov_floors",
]


class _Infinity:
    """Tagged value for an unbounded ratio estimate.

    It compares greater than every real number and equal only to itself.
    Arithmetic is deliberately unsupported so that callers must branch.
    """

    _instance: "_Infinity | None" = None

    def __new__(cls) -> "_Infinity":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())

    def __eq__(self, other: object) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("condsense.INFINITY")

    def __lt__(self, other: object) -> bool:
        return False

    def __le__(self, other: object) -> bool:
        return other is self

    def __gt__(self, other: object) -> bool:
        return other is not self

    def __ge__(self, other: object) -> bool:
        return True


INFINITY = _Infinity()

Ratio = Union[float, _Infinity]


class Verdict(enum.Enum):
    """Outcome of a property or identity tester."""

    ACCEPT = "ACCEPT"
    REJECT = "REJECT"

    def __str__(self) -> str:
        return self.value


class EmptyGridError(ValueError):
    """Raised when the requested dyadic grid has no admissible level."""


@dataclass(frozen=True)
class CompareResult:
    """Output of :func:`compare`.

    Parameters
    ----------
    alpha : float or INFINITY
        Estimate of ``D(x) / D(y)``; ``INFINITY`` when ``y`` was never returned.
    reps_used : int
        Number of pair queries issued.
    """

    alpha: Ratio
    reps_used: int

    @property
    def is_infinite(self) -> bool:
        return self.alpha is INFINITY


@dataclass(frozen=True)
class DyadicLevel:
    """A grid point ``(alpha, beta) = (2^-a, 2^-b)``."""

    alpha: float
    beta: float
    a: int
    b: int


def _log_inv(eps: float) -> float:
    if not 0 < eps < 1:
        raise ArgumentError(f"eps must lie in (0, 1), got {eps}")
    return math.log(1.0 / eps)


def compare_reps(gamma: float, eps: float, cfg: Config | None = None) -> int:
    """Number of pair queries used by one comparison at accuracy ``gamma``."""
    cfg = cfg or DEFAULT_CONFIG
    if not 0 < gamma < 1:
        raise ArgumentError(f"gamma must lie in (0, 1), got {gamma}")
    return max(1, math.ceil(cfg.compare_reps_mult * gamma ** -2 * _log_inv(eps)))


def compare(
    handle: _Access, x: int, y: int, gamma: float, eps: float, cfg: Config | None = None
) -> CompareResult:
    """Estimate ``D(x) / D(y)`` as ``c / (k - c)`` from ``k`` pair queries.

    Parameters
    ----------
    handle : oracle access
        Handle or view providing two-element conditional queries.
    x, y : int
        Distinct elements with ``D(x) + D(y) > 0``.
    gamma : float
        Target additive accuracy, in ``(0, 1)``.
    eps : float
        Accuracy parameter of the calling tester; the number of queries
        grows with ``log(1 / eps)``.

    Returns
    -------
    CompareResult
    """
    k = compare_reps(gamma, eps, cfg)
    if x == y:
        raise ArgumentError("compare needs two distinct elements")
    c = int(handle.pair_counts(np.array([x]), np.array([y]), k)[0])
    alpha: Ratio = INFINITY if c == k else c / (k - c)
    return CompareResult(alpha=alpha, reps_used=k)


def compare_many(
    handle: _Access,
    xs: np.ndarray,
    ys: np.ndarray,
    gamma: float,
    eps: float,
    cfg: Config | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`compare` over pairs ``(xs[i], ys[i])``.

    Pairs with ``xs[i] == ys[i]`` have ratio exactly one and issue no query.

    Returns
    -------
    alpha : np.ndarray
        Finite estimates; entries flagged infinite hold ``0`` as placeholder.
    infinite : np.ndarray of bool
        Where ``y`` was never returned.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    k = compare_reps(gamma, eps, cfg)
    alpha = np.ones(xs.shape, dtype=np.float64)
    infinite = np.zeros(xs.shape, dtype=bool)
    distinct = xs != ys
    if np.any(distinct):
        c = handle.pair_counts(xs[distinct], ys[distinct], k)
        inf = c == k
        vals = np.zeros(c.shape, dtype=np.float64)
        vals[~inf] = c[~inf] / (k - c[~inf])
        alpha[distinct] = vals
        infinite[distinct] = inf
    return alpha, infinite


def _first_count(k: np.ndarray, threshold: float, strict: bool) -> np.ndarray:
    """Smallest count ``c`` whose ratio ``c / (k - c)`` exceeds ``threshold``.

    With ``strict`` the ratio must be ``> threshold``, otherwise ``>=``.
    The count ``c = k`` (ratio INFINITY) always qualifies.
    """
    k = np.asarray(k, dtype=np.int64)
    guess = np.floor(threshold * k / (1.0 + threshold)).astype(np.int64) - 2
    best = k.copy()
    for offset in range(6, -1, -1):
        c = np.clip(guess + offset, 0, k)
        lhs = c - threshold * (k - c)
        ok = (lhs > 0) if strict else (lhs >= 0)
        ok |= c == k
        best = np.where(ok, np.minimum(best, c), best)
    return best


def count_window(k: int | np.ndarray, lo: float, hi: float, strict: bool) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive count range ``[c_lo, c_hi]`` whose ratio lies in the window.

    Parameters
    ----------
    k : int or array
        Number of pair queries.
    lo, hi : float
        Ratio window.
    strict : bool
        ``True`` for the open window ``(lo, hi)``, ``False`` for ``[lo, hi]``.
    """
    k = np.asarray(k, dtype=np.int64)
    c_lo = _first_count(k, lo, strict=strict)
    c_hi = _first_count(k, hi, strict=not strict) - 1
    c_hi = np.minimum(c_hi, k - 1)
    return c_lo, c_hi


@lru_cache(maxsize=1024)
def _window_counts(k: int, lo: float, hi: float, strict: bool) -> tuple[int, int]:
    c_lo, c_hi = count_window(k, lo, hi, strict)
    return int(c_lo), int(c_hi)


def compare_window_hits(
    handle: _Access,
    xs: np.ndarray,
    ys: np.ndarray,
    batches: int | np.ndarray,
    gamma: float,
    eps: float,
    window: tuple[float, float],
    strict: bool,
    cfg: Config | None = None,
) -> np.ndarray:
    """Per pair, how many of ``batches`` independent comparisons land in ``window``.

    Equivalent in distribution to running :func:`compare` ``batches`` times
    per pair and counting the results inside the window.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    batches_arr = np.broadcast_to(np.asarray(batches, dtype=np.int64), xs.shape)
    k = compare_reps(gamma, eps, cfg)
    lo, hi = window
    one_inside = (lo < 1 < hi) if strict else (lo <= 1 <= hi)
    hits = np.where(one_inside, batches_arr, 0).astype(np.int64)
    distinct = (xs != ys) & (batches_arr > 0)
    if np.any(distinct):
        c_lo, c_hi = _window_counts(k, float(lo), float(hi), bool(strict))
        # A single comparison is cheaper as a direct binomial draw.
        single = distinct & (batches_arr == 1)
        multi = distinct & (batches_arr > 1)
        if np.any(single):
            c = handle.pair_counts(xs[single], ys[single], k)
            hits[single] = ((c >= c_lo) & (c <= c_hi)).astype(np.int64)
        if np.any(multi):
            hits[multi] = handle.pair_window_hits(
                xs[multi], ys[multi], k, batches_arr[multi], c_lo, c_hi
            )
    return hits


def geometric_cap(scale: float, eps: float, cfg: Config | None = None) -> int:
    """Cap ``C * max(scale, 1) * log(1 / eps)`` for geometric counting loops."""
    cfg = cfg or DEFAULT_CONFIG
    return max(1, math.ceil(cfg.geometric_cap_mult * max(scale, 1.0) * _log_inv(eps)))


def geometric_count(handle: _Access, numerator: int, denominator: int, cap: int) -> int:
    """Count ``numerator`` returns before the first ``denominator`` return.

    Repeats the pair query on ``{numerator, denominator}``; the expected
    uncapped count is ``D(numerator) / D(denominator)``.  The loop stops
    once the count reaches ``cap``.

    Parameters
    ----------
    handle : oracle access
    numerator, denominator : int
        Distinct elements, ``D(denominator) > 0``.
    cap : int
        Hard stop, at least 1.

    Returns
    -------
    int
        ``min(cap, G)``.
    """
    if cap < 1:
        raise ArgumentError("cap must be at least 1")
    if numerator == denominator:
        raise ArgumentError("geometric_count needs two distinct elements")
    total = handle.geometric_sums(np.array([numerator]), np.array([denominator]), cap, 1)
    return int(total[0])


def dyadic_levels(eps: float, alpha_floor: float, product_floor: float) -> list[DyadicLevel]:
    """All dyadic ``(alpha, beta)`` with ``alpha >= alpha_floor`` and ``alpha * beta >= product_floor``.

    Parameters
    ----------
    eps : float
        Accuracy parameter in ``(0, 1)`` (validated only).
    alpha_floor, product_floor : float
        Positive lower bounds.

    Returns
    -------
    list of DyadicLevel
        Ordered by decreasing ``alpha`` and then decreasing ``beta``.
    """
    _log_inv(eps)
    if alpha_floor <= 0 or product_floor <= 0:
        raise ArgumentError("floors must be positive")
    levels: list[DyadicLevel] = []
    a = 0
    while 2.0 ** -a >= alpha_floor:
        alpha = 2.0 ** -a
        b = 0
        while alpha * 2.0 ** -b >= product_floor:
            levels.append(DyadicLevel(alpha=alpha, beta=2.0 ** -b, a=a, b=b))
            b += 1
        a += 1
    if not levels:
        raise EmptyGridError(
            f"no dyadic level satisfies alpha >= {alpha_floor} and alpha*beta >= {product_floor}"
        )
    return levels


def reverse_markov_floors(mean_floor: float) -> tuple[float, float]:
    """Grid floors that catch any ``[0, 1]`` variable with mean at least ``mean_floor``.

    Let ``m = mean_floor`` and ``A = floor(log2(4 / m)) + 1``.  Values below
    ``2^-(A-1) < m / 2`` contribute less than ``m / 2`` to the mean, so some
    ``a < A`` has ``2^-a P(X >= 2^-a) >= m / (4 A)``.  Rounding the
    probability down to a power of two loses at most a factor 2.

    Returns
    -------
    alpha_floor, product_floor : float
        ``m / 4`` and ``m / (8 A)``; every such variable has a level of
        ``dyadic_levels(eps, alpha_floor, product_floor)`` with
        ``P(X >= alpha) >= beta``.
    """
    if not 0 < mean_floor <= 1:
        raise ArgumentError(f"mean_floor must lie in (0, 1], got {mean_floor}")
    depth = math.floor(math.log2(4.0 / mean_floor)) + 1
    return mean_floor / 4.0, mean_floor / (8.0 * depth)
