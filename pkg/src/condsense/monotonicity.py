"""Monotonicity testing with COND queries.

A non-increasing distribution is close to its flattening over the oblivious
decomposition of ``[N]`` into geometrically growing intervals, and the
flattening is monotone exactly when the reduced distribution over interval
indices grows by at most the interval-size ratio from one index to the
next.  :func:`test_monotone` checks both halves:

* :func:`dist_to_flat` estimates ``d_TV(D, flatten(D))`` by averaging
  tolerant uniformity estimates on the intervals of sampled elements;
* :func:`expo_tester` looks for consecutive interval indices whose mass
  ratio exceeds the allowed bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .dist_core import (
    ArgumentError,
    BlockView,
    Distribution,
    OracleHandle,
    PiecewiseDistribution,
    SubsetView,
    _Access,
    make_distribution,
)
from .primitives import Verdict, compare_many, dyadic_levels, reverse_markov_floors
from .tolerant_uniformity import MAX_EPS, tolerant_unif

__all__ = [
    "Decomposition",
    "MonotoneResult",
    "ReducedView",
    "oblivious_decomposition",
    "flatten",
    "reduce_distribution",
    "dist_to_flat",
    "expo_levels",
    "expo_tester",
    "test_monotone",
    "test_monotone_detailed",
]


@dataclass(frozen=True)
class Decomposition:
    """Partition of ``[N]`` into consecutive intervals ``I_1, ..., I_ell``.

    Parameters
    ----------
    alpha : float
        Growth parameter; ``|I_k| = floor((1 + alpha)^k)`` except that the
        last interval is clipped at ``N``.
    n : int
        Domain size.
    sizes : tuple of int
        Interval lengths, in order.
    """

    alpha: float
    n: int
    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if sum(self.sizes) != self.n or min(self.sizes) < 1:
            raise ArgumentError("interval sizes must be positive and sum to n")

    @property
    def ell(self) -> int:
        return len(self.sizes)

    @property
    def starts(self) -> np.ndarray:
        """First element of every interval (1-based)."""
        sizes = np.asarray(self.sizes, dtype=np.int64)
        return np.concatenate(([1], 1 + np.cumsum(sizes)[:-1]))

    @property
    def bounds(self) -> list[tuple[int, int]]:
        """Inclusive ``(lo, hi)`` for every interval."""
        starts = self.starts
        return [(int(s), int(s) + size - 1) for s, size in zip(starts, self.sizes)]

    @property
    def intervals(self) -> list[range]:
        return [range(lo, hi + 1) for lo, hi in self.bounds]

    @property
    def ratio_bounds(self) -> np.ndarray:
        """``|I_{k+1}| / |I_k|`` for ``k = 1..ell-1``.

        A non-increasing distribution satisfies ``D(I_{k+1}) <= ratio * D(I_k)``
        with these ratios.  Because of the floors they can exceed
        ``1 + alpha`` (for example sizes ``1, 2``) and can also be exactly 1.
        """
        sizes = np.asarray(self.sizes, dtype=np.float64)
        return sizes[1:] / sizes[:-1]

    def interval_of(self, elements: np.ndarray | Sequence[int] | int) -> np.ndarray:
        """1-based interval index of each element."""
        elements = np.asarray(elements, dtype=np.int64)
        return np.searchsorted(self.starts, elements, side="right").astype(np.int64)


def oblivious_decomposition(n: int, alpha: float) -> Decomposition:
    """Intervals of length ``floor((1 + alpha)^k)``, ``k = 1, 2, ...``.

    Intervals are emitted until they cover ``[n]``; the last one is clipped.

    Examples
    --------
    >>> oblivious_decomposition(10, 0.5).sizes
    (1, 2, 3, 4)
    """
    if n < 1:
        raise ArgumentError(f"n must be at least 1, got {n}")
    if not 0 < alpha <= 1:
        raise ArgumentError(f"alpha must lie in (0, 1], got {alpha}")
    sizes: list[int] = []
    covered = 0
    k = 1
    while covered < n:
        size = max(1, math.floor((1.0 + alpha) ** k))
        size = min(size, n - covered)
        sizes.append(size)
        covered += size
        k += 1
    return Decomposition(alpha=float(alpha), n=int(n), sizes=tuple(sizes))


def _check_match(dist: Distribution | PiecewiseDistribution, dec: Decomposition) -> None:
    if dist.n != dec.n:
        raise ArgumentError(f"distribution has n={dist.n} but decomposition has n={dec.n}")


def reduce_distribution(dist: Distribution | PiecewiseDistribution, dec: Decomposition) -> np.ndarray:
    """Interval masses ``(D(I_1), ..., D(I_ell))``."""
    _check_match(dist, dec)
    return np.array([dist.range_mass(lo, hi) for lo, hi in dec.bounds])


def flatten(dist: Distribution | PiecewiseDistribution, dec: Decomposition) -> Distribution:
    """Spread every interval's mass evenly over the interval."""
    masses = reduce_distribution(dist, dec)
    sizes = np.asarray(dec.sizes, dtype=np.int64)
    return make_distribution(np.repeat(masses / sizes, sizes))


@dataclass
class ReducedView:
    """Oracle access to the reduced distribution ``k -> D(I_k)``.

    Parameters
    ----------
    access : BlockView
        Block-level view; a draw is a COND query on the union of the
        requested intervals followed by locating the interval.
    decomposition : Decomposition
        Intervals of the base domain.
    ratio_bounds : np.ndarray
        Allowed ratio ``q_{k+1} / q_k`` for ``k = 1..ell-1``.
    """

    access: BlockView
    decomposition: Decomposition
    ratio_bounds: np.ndarray

    @property
    def base(self) -> OracleHandle:
        return self.access.handle

    @property
    def ell(self) -> int:
        return self.decomposition.ell

    @classmethod
    def from_handle(cls, handle: _Access, dec: Decomposition) -> "ReducedView":
        """Reduce a handle over ``[N]`` with the decomposition's own ratio bounds."""
        if handle.n != dec.n:
            raise ArgumentError(f"handle has n={handle.n} but decomposition has n={dec.n}")
        base = handle.handle
        if base is not handle:
            raise ArgumentError("the reduced view needs a base handle, not a view")
        access = BlockView.from_intervals(base, dec.bounds)
        return cls(access=access, decomposition=dec, ratio_bounds=dec.ratio_bounds)

    @classmethod
    def from_distribution(
        cls,
        q: Sequence[float] | np.ndarray,
        alpha: float,
        seed: int = 0,
        cfg: Config | None = None,
    ) -> "ReducedView":
        """Direct access to a distribution ``q`` over ``[ell]`` with ratio bound ``1 + alpha``."""
        dist = make_distribution(q)
        handle = OracleHandle(dist, seed=seed, cfg=cfg)
        dec = Decomposition(alpha=float(alpha), n=dist.n, sizes=(1,) * dist.n)
        access = BlockView(handle, dist.probs)
        bounds = np.full(dist.n - 1, 1.0 + alpha)
        return cls(access=access, decomposition=dec, ratio_bounds=bounds)


@dataclass(frozen=True)
class MonotoneResult:
    """Verdict of :func:`test_monotone_detailed` with its intermediate values."""

    verdict: Verdict
    dist_to_flat: float
    expo_verdict: Verdict | None


def _cfg(cfg: Config | None) -> Config:
    return cfg if cfg is not None else DEFAULT_CONFIG


def _check_unit(name: str, value: float) -> None:
    if not 0 < value <= 0.5:
        raise ArgumentError(f"{name} must lie in (0, 1/2], got {value}")


def dist_to_flat(
    handle: _Access,
    eps: float,
    alpha: float,
    cfg: Config | None = None,
    decomposition: Decomposition | None = None,
) -> float:
    """Estimate ``d_TV(D, flatten(D))`` to within ``eps / 4``.

    Since ``d_TV(D, flatten(D)) = sum_k D(I_k) d_TV(D|I_k, U(I_k))``, the plain
    mean over samples ``i ~ D`` of the distance of ``D`` restricted to the
    interval of ``i`` from uniform is unbiased.  Each distance is estimated
    by :func:`tolerant_unif`; intervals of length one contribute 0.

    Parameters
    ----------
    handle : oracle access
        Base handle over ``[N]``.
    eps : float
        Accuracy, in ``(0, 1/2]``.
    alpha : float
        Decomposition parameter, in ``(0, 1/2]``.
    decomposition : Decomposition, optional
        Precomputed ``oblivious_decomposition(N, alpha)``.
    """
    cfg = _cfg(cfg)
    _check_unit("eps", eps)
    _check_unit("alpha", alpha)
    dec = decomposition if decomposition is not None else oblivious_decomposition(handle.n, alpha)
    inner_eps = min(eps / cfg.dist_to_flat_inner_div, MAX_EPS)
    m = max(1, math.ceil(cfg.dist_to_flat_samples_mult / eps**2))
    ks = dec.interval_of(handle.sample(m))
    bounds = dec.bounds
    views: dict[int, SubsetView] = {}
    total = 0.0
    for k in ks:
        lo, hi = bounds[int(k) - 1]
        if hi == lo:
            continue
        view = views.get(int(k))
        if view is None:
            view = SubsetView(handle.handle, np.arange(lo, hi + 1))
            views[int(k)] = view
        total += tolerant_unif(view, inner_eps, cfg)
    return min(max(total / m, 0.0), 1.0)


def expo_levels(eps: float, alpha: float, cfg: Config | None = None):
    """Dyadic ``(tau, beta)`` grid scanned by :func:`expo_tester`.

    A distribution far from the exponential property has witness
    expectation at least ``alpha * eps / 2``; the grid floors are the
    matching :func:`reverse_markov_floors` times the config multipliers.
    """
    cfg = _cfg(cfg)
    tau_floor, product_floor = reverse_markov_floors(alpha * eps / 2.0)
    return dyadic_levels(
        eps, cfg.expo_tau_floor_mult * tau_floor, cfg.expo_product_floor_mult * product_floor
    )


def expo_tester(reduced: ReducedView, eps: float, cfg: Config | None = None) -> Verdict:
    """Test whether ``q_{k+1} <= rho_k q_k`` for all ``k`` or ``q`` is far from it.

    For every dyadic level ``(tau, beta)`` draw ``R = O(beta^-1 log(1/eps))``
    indices ``i ~ q``, skip ``i = 1``, and reject when the comparison of
    ``q_i`` against ``q_{i-1}`` at accuracy ``tau / 3`` reaches
    ``rho_{i-1} + tau / 2``.

    Parameters
    ----------
    reduced : ReducedView
        Access to ``q`` together with the ratio bounds ``rho``.
    eps : float
        Accuracy, in ``(0, 1/2]``; the exponential growth parameter is
        ``eps / cfg.mono_alpha_div``.
    """
    cfg = _cfg(cfg)
    _check_unit("eps", eps)
    if reduced.ell == 1:
        return Verdict.ACCEPT
    alpha = eps / cfg.mono_alpha_div
    log_inv = math.log(1.0 / eps)
    access = reduced.access
    rho = np.asarray(reduced.ratio_bounds, dtype=np.float64)
    for level in expo_levels(eps, alpha, cfg):
        tau, beta = level.alpha, level.beta
        if tau / 3.0 >= 1.0:
            continue
        r = max(1, math.ceil(cfg.expo_R_mult * log_inv / beta))
        draws = np.asarray(access.sample(r), dtype=np.int64)
        draws = draws[draws > 1]
        if draws.size == 0:
            continue
        ratio, infinite = compare_many(access, draws, draws - 1, tau / 3.0, eps, cfg)
        threshold = rho[draws - 2] + tau / 2.0
        if np.any(infinite | (ratio >= threshold)):
            return Verdict.REJECT
    return Verdict.ACCEPT


def test_monotone_detailed(handle: _Access, eps: float, cfg: Config | None = None) -> MonotoneResult:
    """:func:`test_monotone` with the flatness estimate and sub-verdict."""
    cfg = _cfg(cfg)
    _check_unit("eps", eps)
    alpha = eps / cfg.mono_alpha_div
    dec = oblivious_decomposition(handle.n, alpha)
    d_hat = dist_to_flat(handle, eps, alpha, cfg, decomposition=dec)
    if d_hat > eps / 2.0:
        return MonotoneResult(verdict=Verdict.REJECT, dist_to_flat=d_hat, expo_verdict=None)
    expo = expo_tester(ReducedView.from_handle(handle, dec), eps, cfg)
    return MonotoneResult(verdict=expo, dist_to_flat=d_hat, expo_verdict=expo)


def test_monotone(handle: _Access, eps: float, cfg: Config | None = None) -> Verdict:
    """Test whether ``D`` is non-increasing or ``eps``-far from every such distribution.

    Rejects when the estimated distance to the flattening exceeds
    ``eps / 2`` or when :func:`expo_tester` rejects the reduced distribution.

    Parameters
    ----------
    handle : OracleHandle
        Base handle over ``[N]``.
    eps : float
        Distance parameter, in ``(0, 1/2]``.

    Returns
    -------
    Verdict
    """
    return test_monotone_detailed(handle, eps, cfg).verdict


# Keep pytest from collecting these when imported into test modules.
test_monotone.__test__ = False  # type: ignore[attr-defined]
test_monotone_detailed.__test__ = False  # type: ignore[attr-defined]
