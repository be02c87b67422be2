"""Tolerant identity testing against a known reference with COND queries.

:func:`tolerant_id` estimates ``d_TV(D, D*)`` through the identity
``d_TV = 1 - sum_i min(D(i), D*(i))``.  The min-sum is peeled off in rounds:
each round restricts both distributions to the remaining set ``T``, calls
:func:`partial_determining` to find a set ``S`` carrying at least a third of
the remaining reference mass together with an estimate of the min-sum over
``S``, and removes ``S``.

Inside a round the reference is sorted ascending.  :func:`est` estimates
``c1 P(z) / P*(z)`` by chaining

* :func:`est1`, the mass of the prefix ``[z]``,
* :func:`est2`, the mass of one block ``j`` of a :func:`greedy_partition`
  of the prefix, and
* :func:`est3`, the ratio between the block ``{z}`` and block ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .dist_core import ArgumentError, BlockView, Distribution, OracleHandle, SubsetView, _Access, make_distribution
from .primitives import INFINITY, Ratio, compare_window_hits, geometric_cap
from .tolerant_uniformity import constant_approx

__all__ = [
    "ABSENT",
    "SortedReference",
    "GreedyPartition",
    "EstRatio",
    "EstShortcut",
    "EstOutcome",
    "sort_reference",
    "greedy_partition",
    "est1",
    "est2",
    "est3",
    "est",
    "partial_determining",
    "tolerant_id",
    "reduced_eps",
]


class _Absent:
    """Marker returned by :func:`est2` when no usable block was found."""

    _instance: "_Absent | None" = None

    def __new__(cls) -> "_Absent":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False


ABSENT = _Absent()


@dataclass(frozen=True)
class SortedReference:
    """Reference distribution with masses in ascending order.

    Parameters
    ----------
    dstar : Distribution
        Sorted masses; position ``p`` (1-based) holds ``D*(perm[p - 1])``.
    perm : np.ndarray
        Original index of each sorted position.
    """

    dstar: Distribution
    perm: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return self.dstar.probs


@dataclass(frozen=True)
class GreedyPartition:
    """Blocks ``S_1, ..., S_k`` of the sorted prefix ``[z]`` with ``S_k = {z}``.

    ``labels[p - 1]`` is the 0-based block of sorted position ``p``; blocks
    are numbered by their smallest position.
    """

    labels: np.ndarray

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def blocks(self) -> tuple[np.ndarray, ...]:
        order = np.argsort(self.labels, kind="stable")
        cuts = np.flatnonzero(np.diff(self.labels[order])) + 1
        return tuple(part + 1 for part in np.split(order, cuts))


@dataclass(frozen=True)
class EstRatio:
    """Estimate of ``c1 P(z) / P*(z)`` (``INFINITY`` when unbounded)."""

    value: Ratio


@dataclass(frozen=True)
class EstShortcut:
    """The min-sum over the prefix ``[z]`` is small; estimate it as zero."""

    prefix: int
    value: float = 0.0


EstOutcome = Union[EstRatio, EstShortcut]


def _cfg(cfg: Config | None) -> Config:
    return cfg if cfg is not None else DEFAULT_CONFIG


def _log_inv(eps: float) -> float:
    if not 0 < eps < 1:
        raise ArgumentError(f"eps must lie in (0, 1), got {eps}")
    return math.log(1.0 / eps)


def _check_delta(delta: float) -> None:
    if not 0 < delta <= 0.1:
        raise ArgumentError(f"delta must lie in (0, 1/10], got {delta}")


def reduced_eps(eps: float, cfg: Config | None = None) -> float:
    """Working accuracy ``eps / ceil(log2(1/eps))^p`` used inside :func:`tolerant_id`."""
    cfg = _cfg(cfg)
    _log_inv(eps)
    return eps / max(1, math.ceil(math.log2(1.0 / eps))) ** cfg.tid_log_power


# ---------------------------------------------------------------------------
# Reference bookkeeping
# ---------------------------------------------------------------------------


def sort_reference(dstar: Distribution) -> SortedReference:
    """Sort the reference ascending; ties keep the original index order."""
    perm = np.argsort(dstar.probs, kind="stable")
    return SortedReference(make_distribution(dstar.probs[perm]), (perm + 1).astype(np.int64))


def greedy_partition(ref: SortedReference, z: int) -> GreedyPartition:
    """Split ``[z - 1]`` into blocks of reference mass in ``[P*(z)/2, P*(z)]``.

    Positions are scanned from ``z - 1`` downward.  Positions of mass at
    least ``P*(z)/2`` become singletons; lighter ones are accumulated until
    the block reaches ``P*(z)/2``.  A light remainder is merged into the
    lightest accumulated block; the bounds cannot always be met exactly
    (three positions of mass ``0.45 P*(z)`` admit no valid split), and in
    that case the merged block stays below ``1.5 P*(z)``.

    Raises
    ------
    ArgumentError
        If ``P*([z - 1]) <= P*(z) / 2``.
    """
    probs = ref.probs
    if not 1 <= z <= probs.size:
        raise ArgumentError(f"z must lie in 1..{probs.size}")
    top = float(probs[z - 1])
    if z == 1 or probs[: z - 1].sum() <= 0.5 * top:
        raise ArgumentError("greedy partition needs P*([z-1]) > P*(z)/2")
    half = 0.5 * top
    masses = probs[: z - 1].tolist()
    raw = [0] * (z - 1)  # block number in scan order
    block_mass: list[float] = []
    accumulated: list[int] = []
    open_block = -1
    for pos in range(z - 2, -1, -1):
        p = masses[pos]
        if p >= half:
            raw[pos] = len(block_mass)
            block_mass.append(p)
            continue
        if open_block < 0:
            open_block = len(block_mass)
            block_mass.append(0.0)
        raw[pos] = open_block
        block_mass[open_block] += p
        if block_mass[open_block] >= half:
            accumulated.append(open_block)
            open_block = -1
    if open_block >= 0:
        pool = accumulated or [b for b in range(len(block_mass)) if b != open_block]
        target = min(pool, key=lambda b: block_mass[b])
        raw = [target if r == open_block else r for r in raw]
    raw_arr = np.array(raw + [len(block_mass)], dtype=np.int64)
    _, first = np.unique(raw_arr, return_index=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    _, inverse = np.unique(raw_arr, return_inverse=True)
    return GreedyPartition(rank[inverse])


# ---------------------------------------------------------------------------
# The three estimators
# ---------------------------------------------------------------------------


def est1(handle: _Access, eps: float, delta: float, z: int, cfg: Config | None = None) -> float:
    """Fraction of ``R = ceil(m eps^-1 log(1/eps) delta^-2)`` draws landing in ``[z]``."""
    cfg = _cfg(cfg)
    log_inv = _log_inv(eps)
    _check_delta(delta)
    n = handle.n
    if not 1 <= z <= n:
        raise ArgumentError(f"z must lie in 1..{n}")
    R = max(1, math.ceil(cfg.est1_R_mult * log_inv / (eps * delta ** 2)))
    return handle.count_in(np.arange(1, z + 1), R) / R


def est2(view: _Access, eps: float, delta: float, cfg: Config | None = None):
    """Pick a block ``j`` of moderate mass and estimate ``Q(j)``.

    The block comes from a lazy :func:`constant_approx` on the block
    distribution.  With ``R`` fresh draws ``x ~ Q`` and ``y`` uniform over
    blocks, ``u`` is the fraction of ``y`` comparable with ``j`` and ``q``
    the mean over comparable ``x`` of the capped number of ``j`` returns
    before the first ``x`` return; then ``q / (k u)`` estimates ``Q(j)``.

    Returns
    -------
    (int, float) or ABSENT
    """
    cfg = _cfg(cfg)
    log_inv = _log_inv(eps)
    _check_delta(delta)
    anchors = constant_approx(view, eps, cfg, R_mult=cfg.est2_const_approx_R_mult, first_only=True)
    if not anchors:
        return ABSENT
    j = anchors[0].x
    k = view.n
    R = max(1, math.ceil(cfg.est2_R_mult * log_inv ** 3 / (eps * delta) ** 2))
    blocks = np.arange(1, k + 1)
    target = np.full(k, j)
    window = cfg.est2_window
    gamma = cfg.const_approx_gamma
    y_counts = view.rng.multinomial(R, np.full(k, 1.0 / k))
    u_hits = compare_window_hits(view, blocks, target, y_counts, gamma, eps, window, False, cfg)
    x_counts = view.sample_counts(R)
    x_hits = compare_window_hits(view, blocks, target, x_counts, gamma, eps, window, False, cfg)
    total = float(x_hits[j - 1])  # x = j: ratio exactly 1
    others = (blocks != j) & (x_hits > 0)
    if np.any(others):
        cap = geometric_cap(1.0, eps, cfg)
        total += float(view.geometric_sums(target[others], blocks[others], cap, x_hits[others]).sum())
    u_tilde = u_hits.sum() / R
    if u_tilde <= 0:
        return ABSENT
    return j, (total / R) / (k * u_tilde)


def est3(view: _Access, eps: float, delta: float, j: int, cfg: Config | None = None) -> Ratio:
    """Estimate ``Q(k) / Q(j)`` where ``k`` is the last block.

    A coarse ratio from ``R`` pair queries is returned as is when it falls
    outside ``[low eps^2, high eps^-2]`` (``INFINITY`` if ``j`` never came
    back).  Otherwise the estimate averages ``T`` capped counts of ``k``
    returns before the first ``j`` return.
    """
    cfg = _cfg(cfg)
    log_inv = _log_inv(eps)
    _check_delta(delta)
    k = view.n
    if not 1 <= j <= k:
        raise ArgumentError(f"j must lie in 1..{k}")
    if j == k:
        return 1.0
    R = max(1, math.ceil(cfg.est3_R_mult * log_inv / eps ** 2))
    ctr = int(view.pair_counts(np.array([k]), np.array([j]), R)[0])
    if ctr == R:
        return INFINITY
    alpha = ctr / (R - ctr)
    if alpha < cfg.est3_low * eps ** 2 or alpha > cfg.est3_high / eps ** 2:
        return alpha
    T = max(1, math.ceil(cfg.est3_T_mult * max(1.0 / alpha, 1.0) * log_inv ** 2 / delta ** 2))
    cap = geometric_cap(max(alpha, 1.0), eps, cfg)
    return float(view.geometric_sums(np.array([k]), np.array([j]), cap, T)[0]) / T


def _half_point(probs: np.ndarray) -> int:
    """Smallest ``L`` with ``P*([L]) >= 1/2``."""
    cumulative = np.cumsum(probs)
    return int(np.searchsorted(cumulative, 0.5 - 1e-12, side="left")) + 1


class _BlockCache:
    """Per-round cache of greedy partitions and their block views."""

    def __init__(self, handle: _Access, ref: SortedReference) -> None:
        self.handle = handle
        self.ref = ref
        self._views: dict[int, BlockView] = {}

    def view(self, z: int) -> BlockView:
        cached = self._views.get(z)
        if cached is None:
            labels = greedy_partition(self.ref, z).labels
            weights = self.handle._weights(np.arange(1, z + 1))
            masses = np.bincount(labels, weights=weights, minlength=int(labels.max()) + 1)
            cached = BlockView(self.handle.handle, masses)
            self._views[z] = cached
        return cached


def _base_handle(handle: _Access) -> OracleHandle:
    return handle.handle


def est(
    handle: _Access,
    eps: float,
    delta: float,
    z: int,
    ref: SortedReference,
    c1: float,
    c2: float,
    cfg: Config | None = None,
    _cache: _BlockCache | None = None,
) -> EstOutcome:
    """Estimate ``c1 P(z) / P*(z)`` or certify that the prefix min-sum is small.

    Parameters
    ----------
    handle : oracle access
        COND access to ``P`` over sorted positions ``1..M``.
    eps, delta : float
        Accuracy and relative precision, ``0 < delta <= 1/10``.
    z : int
        A sorted position with ``z >= L``.
    ref : SortedReference
        The reference ``P*`` over the same positions.
    c1, c2 : float
        Scale factors in ``[eps, 1]``.

    Returns
    -------
    EstRatio or EstShortcut
        ``EstShortcut`` when the prefix mass estimate is at most ``eps / c1``
        or no block estimate was found.
    """
    cfg = _cfg(cfg)
    _log_inv(eps)
    _check_delta(delta)
    probs = ref.probs
    if not 1 <= z <= probs.size:
        raise ArgumentError(f"z must lie in 1..{probs.size}")
    if z < _half_point(probs):
        raise ArgumentError("est needs z >= L")
    for name, c in (("c1", c1), ("c2", c2)):
        if not eps <= c <= 1 + 1e-12:
            raise ArgumentError(f"{name} must lie in [eps, 1], got {c}")
    prefix = est1(handle, eps, delta, z, cfg)
    if prefix <= eps / c1:
        return EstShortcut(z)
    cache = _cache if _cache is not None else _BlockCache(handle, ref)
    view = cache.view(z)
    found = est2(view, eps, delta, cfg)
    if found is ABSENT:
        return EstShortcut(z)
    j, q_tilde = found
    y = est3(view, eps, delta, j, cfg)
    if y is INFINITY:
        return EstRatio(INFINITY)
    return EstRatio(c1 / probs[z - 1] * prefix * q_tilde * y)


# ---------------------------------------------------------------------------
# PartialDetermining and the driver
# ---------------------------------------------------------------------------


def partial_determining(
    handle: _Access,
    eps: float,
    ref: SortedReference,
    c1: float,
    c2: float,
    cfg: Config | None = None,
) -> tuple[np.ndarray, float]:
    """Find ``S`` with ``P*(S) >= 1/3`` and estimate ``sum_{i in S} min(c1 P(i), c2 P*(i))``.

    For ``z >= L`` the contribution ``min(c1 P(z)/P*(z), c2)`` equals ``c2``
    minus a deficit.  At level ``t`` (``delta = 2^-t / 20``) positions
    ``z ~ P*`` are classified by :func:`est` at precisions ``2^-i / 20``,
    ``i <= t``; those whose estimate first leaves the band
    ``c2 (1 +- 2^-i)`` below it at ``i = t`` contribute ``c2 - X`` from a
    fresh estimate ``X``.  The result is ``c2 P*([L:M])`` minus the level
    averages.

    Returns
    -------
    S : np.ndarray
        Sorted positions: ``{L}``, a prefix ``[z]`` or the suffix ``[L:M]``.
    estimate : float
    """
    cfg = _cfg(cfg)
    log_inv = _log_inv(eps)
    probs = ref.probs
    M = probs.size
    if handle.n != M:
        raise ArgumentError("handle and reference must share the domain")
    L = _half_point(probs)
    if probs[L - 1] >= 1.0 / 3.0:
        K = max(1, math.ceil(cfg.pd_singleton_K_mult * log_inv / eps ** 2))
        p_tilde = handle.count_in(np.array([L]), K) / K
        return np.array([L], dtype=np.int64), min(c1 * p_tilde, c2 * probs[L - 1])
    cache = _BlockCache(handle, ref)
    levels = max(2, math.ceil(math.log2(1.0 / eps)) + cfg.pd_T_offset)
    cumulative = np.cumsum(probs)
    rng = handle.rng
    deficit = 0.0
    for t in range(1, levels):
        delta = 2.0 ** -t / 20.0
        S = max(1, math.ceil(cfg.pd_S_mult * (delta / eps) ** 2 * log_inv))
        u = rng.random(S) * cumulative[-1]
        zs = np.minimum(np.searchsorted(cumulative, u, side="right"), M - 1) + 1
        level_sum = 0.0
        for z in zs:
            z = int(z)
            if z < L:
                continue
            below = False
            for i in range(1, t + 1):
                out = est(handle, eps, 2.0 ** -i / 20.0, z, ref, c1, c2, cfg, cache)
                if isinstance(out, EstShortcut):
                    return np.arange(1, z + 1, dtype=np.int64), 0.0
                x = out.value
                if i == t and x < c2 * (1 - 2.0 ** -i):
                    below = True
                elif x < c2 * (1 - 2.0 ** -i) or x > c2 * (1 + 2.0 ** -i):
                    break
            if not below:
                continue
            with _base_handle(handle).substream():
                out = est(handle, eps, delta, z, ref, c1, c2, cfg, cache)
            if isinstance(out, EstShortcut):
                return np.arange(1, z + 1, dtype=np.int64), 0.0
            x = 2 * c2 if out.value is INFINITY else min(max(out.value, 0.0), 2 * c2)
            level_sum += c2 - x
        deficit += level_sum / S
    suffix = np.arange(L, M + 1, dtype=np.int64)
    return suffix, c2 * float(probs[L - 1:].sum()) - deficit


def tolerant_id(handle: OracleHandle, dstar: Distribution, eps: float, cfg: Config | None = None) -> float:
    """Estimate ``d_TV(D, D*)`` for a known reference ``D*``.

    Parameters
    ----------
    handle : OracleHandle
        COND access to ``D``.
    dstar : Distribution
        The reference, over the same domain.
    eps : float
        Accuracy, in ``(0, 1/4]``.

    Returns
    -------
    float
        ``1 - gamma`` where ``gamma`` sums the per-round min-sum estimates;
        within ``cfg.C_ti * eps`` of the truth with probability at least 2/3.
    """
    cfg = _cfg(cfg)
    if not 0 < eps <= 0.25:
        raise ArgumentError(f"eps must lie in (0, 1/4], got {eps}")
    if dstar.n != handle.n:
        raise ArgumentError("reference and target domains differ")
    work_eps = reduced_eps(eps, cfg)
    log_inv = math.log(1.0 / work_eps)
    order = sort_reference(dstar).perm
    alive = np.ones(order.size, dtype=bool)
    c1, c2 = 1.0, 1.0
    gamma = 0.0
    K = max(1, math.ceil(cfg.tid_mass_K_mult * log_inv / work_eps ** 2))
    for _ in range(10 * order.size + 10):
        if c1 < 2 * work_eps or c2 < 2 * work_eps:
            break
        remaining = order[alive]
        view = SubsetView(handle, remaining)
        local_ref = SortedReference(make_distribution(dstar.probs[remaining - 1]), remaining)
        positions, beta = partial_determining(view, work_eps, local_ref, c1, c2, cfg)
        gamma += beta
        alive[np.flatnonzero(alive)[positions - 1]] = False
        left = order[alive]
        c2 = float(dstar.probs[left - 1].sum()) if left.size else 0.0
        c1 = handle.count_in(left, K) / K if left.size else 0.0
    return 1.0 - gamma
