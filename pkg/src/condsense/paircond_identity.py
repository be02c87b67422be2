"""Identity testing with SAMP and PAIRCOND queries only.

:func:`pcond_id` buckets the domain by dyadic windows of the reference mass,
then runs two checks:

1. :func:`small_support_identity` tests whether the bucket marginal of the
   unknown distribution equals that of the reference;
2. a dyadic sweep over ``(alpha, beta)`` draws ``i ~ D`` and ``j`` uniform in
   the bucket of ``i`` and rejects when the pair probability
   ``D(i) / (D(i) + D(j))`` is visibly off from its reference value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .dist_core import ArgumentError, Distribution, PiecewiseDistribution, _Access
from .primitives import Verdict, dyadic_levels, reverse_markov_floors

__all__ = [
    "BucketPartition",
    "BucketMarginal",
    "bucket_partition",
    "bucket_marginal",
    "vv_sample_count",
    "chi_square_statistic",
    "null_threshold",
    "small_support_identity",
    "pcond_id",
    "pcond_levels",
]

AnyDistribution = Distribution | PiecewiseDistribution


@dataclass(frozen=True, eq=False)
class BucketPartition:
    """Dyadic bucketing of ``[N]`` by reference mass.

    Bucket ``k <= K`` holds ``{i : 2^-k < D*(i) <= 2^(1-k)}`` and bucket
    ``K + 1`` (the tail) holds everything else.  Buckets are stored as
    maximal runs of consecutive elements, so a piecewise-constant reference
    over a huge domain stays small.

    Parameters
    ----------
    K : int
        Number of dyadic buckets, ``ceil(log2(10 N / eps))``.
    n : int
        Domain size.
    seg_starts, seg_lengths, seg_buckets : np.ndarray
        Runs of consecutive elements sharing a bucket, ordered by start.
    """

    K: int
    n: int
    seg_starts: np.ndarray
    seg_lengths: np.ndarray
    seg_buckets: np.ndarray

    def __post_init__(self) -> None:
        order = np.argsort(self.seg_buckets, kind="stable")
        lengths = self.seg_lengths[order]
        buckets = self.seg_buckets[order]
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_cum_lengths", np.cumsum(lengths))
        first = np.searchsorted(buckets, np.arange(1, self.K + 3), side="left")
        object.__setattr__(self, "_first", first)

    @property
    def sizes(self) -> np.ndarray:
        """``|S_k|`` for ``k = 1..K+1``."""
        return np.bincount(self.seg_buckets, weights=self.seg_lengths, minlength=self.K + 2)[1:].astype(
            np.int64
        )

    def bucket_of(self, items: np.ndarray | int) -> np.ndarray:
        """Bucket index of each element."""
        items = np.asarray(items, dtype=np.int64)
        seg = np.searchsorted(self.seg_starts, items, side="right") - 1
        return self.seg_buckets[seg]

    def members(self, k: int) -> np.ndarray:
        """Elements of bucket ``k``, in increasing order."""
        if not 1 <= k <= self.K + 1:
            raise ArgumentError(f"bucket index must lie in 1..{self.K + 1}")
        mask = self.seg_buckets == k
        parts = [np.arange(s, s + l) for s, l in zip(self.seg_starts[mask], self.seg_lengths[mask])]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def uniform_in(self, buckets: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One uniform element from each requested (non-empty) bucket."""
        buckets = np.asarray(buckets, dtype=np.int64)
        lo = self._first[buckets - 1]
        hi = self._first[buckets]
        if np.any(hi <= lo):
            raise ArgumentError("cannot draw from an empty bucket")
        before = np.where(lo > 0, self._cum_lengths[np.maximum(lo - 1, 0)], 0)
        total = self._cum_lengths[hi - 1] - before
        offset = before + (rng.random(buckets.size) * total).astype(np.int64)
        offset = np.minimum(offset, self._cum_lengths[hi - 1] - 1)
        pos = np.searchsorted(self._cum_lengths, offset, side="right")
        seg = self._order[pos]
        start_offset = np.where(pos > 0, self._cum_lengths[np.maximum(pos - 1, 0)], 0)
        return self.seg_starts[seg] + (offset - start_offset)


@dataclass(frozen=True)
class BucketMarginal:
    """Distribution over bucket indices ``1..K+1``.

    Parameters
    ----------
    masses : np.ndarray
        ``masses[k - 1]`` is the mass of bucket ``k``.
    """

    masses: np.ndarray

    @property
    def size(self) -> int:
        return int(self.masses.size)


def _runs(dist: AnyDistribution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(dist, PiecewiseDistribution):
        return dist.starts, dist.lengths, dist.masses
    n = dist.n
    return np.arange(1, n + 1, dtype=np.int64), np.ones(n, dtype=np.int64), dist.probs


def _dyadic_bucket(p: np.ndarray, K: int) -> np.ndarray:
    """``k`` with ``2^-k < p <= 2^(1-k)``; ``K + 1`` when ``k > K`` or ``p = 0``."""
    mantissa, exponent = np.frexp(p)
    k = np.where(mantissa == 0.5, 2 - exponent, 1 - exponent).astype(np.int64)
    return np.where((p <= 0) | (k > K), K + 1, k)


def bucket_partition(dstar: AnyDistribution, eps: float) -> BucketPartition:
    """Split ``[N]`` into dyadic reference-mass buckets plus a tail.

    Examples
    --------
    >>> from condsense.dist_core import make_distribution
    >>> bp = bucket_partition(make_distribution([0.5, 0.3, 0.2]), 0.5)
    >>> bp.bucket_of([1, 2, 3]).tolist()
    [2, 2, 3]
    """
    if not 0 < eps < 1:
        raise ArgumentError(f"eps must lie in (0, 1), got {eps}")
    n = dstar.n
    K = math.ceil(math.log2(10 * n / eps))
    starts, lengths, masses = _runs(dstar)
    labels = _dyadic_bucket(np.asarray(masses, dtype=np.float64), K)
    # Merge consecutive runs that share a bucket.
    keep = np.concatenate(([True], labels[1:] != labels[:-1]))
    seg_starts = np.asarray(starts, dtype=np.int64)[keep]
    seg_buckets = labels[keep]
    ends = np.concatenate((seg_starts[1:], [n + 1]))
    return BucketPartition(
        K=K, n=n, seg_starts=seg_starts, seg_lengths=ends - seg_starts, seg_buckets=seg_buckets
    )


def bucket_marginal(dist: AnyDistribution, partition: BucketPartition) -> BucketMarginal:
    """Exact bucket masses of ``dist`` under ``partition``."""
    if dist.n != partition.n:
        raise ArgumentError("distribution and partition sizes differ")
    seg_mass = np.array(
        [dist.range_mass(int(s), int(s + l - 1)) for s, l in zip(partition.seg_starts, partition.seg_lengths)]
    )
    masses = np.bincount(partition.seg_buckets, weights=seg_mass, minlength=partition.K + 2)[1:]
    return BucketMarginal(masses=masses)


def vv_sample_count(support: int, eps: float, cfg: Config | None = None) -> int:
    """Samples for the marginal test: ``vv_mult * sqrt(support) / (eps / 10)^2``."""
    cfg = cfg or DEFAULT_CONFIG
    return max(1, math.ceil(cfg.vv_mult * math.sqrt(support) / (eps / 10.0) ** 2))


def chi_square_statistic(counts: np.ndarray, expected_probs: np.ndarray) -> float:
    """Bias-corrected statistic ``sum ((X_k - m p_k)^2 - X_k) / (m p_k)`` over ``p_k > 0``.

    Subtracting ``X_k`` removes the Poisson variance term, so the mean under
    the null is ``-m sum p_k^2 / (m p_k)``, close to 0 on spread-out supports
    where plain chi-square would be dominated by noise.
    """
    counts = np.asarray(counts, dtype=np.float64)
    m = counts.sum()
    pos = expected_probs > 0
    expected = m * expected_probs[pos]
    x = counts[pos]
    return float((((x - expected) ** 2 - x) / expected).sum())


@lru_cache(maxsize=256)
def _null_threshold(probs: tuple[float, ...], m: int, sims: int, quantile: float) -> float:
    p = np.clip(np.asarray(probs), 0.0, None)
    p = p / p.sum()
    # Calibration is a property of the reference alone, so a fixed stream is used.
    rng = np.random.default_rng(0x5EED)
    draws = rng.multinomial(m, p, size=sims)
    pos = p > 0
    expected = m * p[pos]
    x = draws[:, pos].astype(np.float64)
    stats = (((x - expected) ** 2 - x) / expected).sum(axis=1)
    return float(np.quantile(stats, quantile, method="higher"))


def null_threshold(sstar: BucketMarginal, m: int, cfg: Config | None = None) -> float:
    """Rejection cutoff: the configured quantile of the statistic under ``S = S*``."""
    cfg = cfg or DEFAULT_CONFIG
    probs = tuple(float(v) for v in sstar.masses)
    return _null_threshold(probs, int(m), int(cfg.vv_null_sims), float(cfg.vv_quantile))


def small_support_identity(
    samples: np.ndarray,
    sstar: BucketMarginal,
    eps: float,
    cfg: Config | None = None,
) -> Verdict:
    """Test ``S = S*`` against ``d_TV(S, S*) >= eps / 10`` from bucket samples.

    Rejects outright when a sample lands in a bucket of reference mass 0,
    otherwise compares :func:`chi_square_statistic` to the null quantile
    computed by simulation.

    Parameters
    ----------
    samples : array of int
        Bucket indices in ``1..len(sstar.masses)``.
    sstar : BucketMarginal
        Reference bucket masses.
    eps : float
        Distance parameter of the calling tester.
    """
    cfg = cfg or DEFAULT_CONFIG
    samples = np.asarray(samples, dtype=np.int64)
    needed = vv_sample_count(sstar.size, eps, cfg)
    if samples.size < needed:
        raise ArgumentError(f"need at least {needed} samples, got {samples.size}")
    if samples.min() < 1 or samples.max() > sstar.size:
        raise ArgumentError("bucket index out of range")
    counts = np.bincount(samples, minlength=sstar.size + 1)[1:]
    if np.any(counts[sstar.masses <= 0] > 0):
        return Verdict.REJECT
    stat = chi_square_statistic(counts, sstar.masses)
    threshold = null_threshold(sstar, int(samples.size), cfg)
    return Verdict.REJECT if stat > threshold else Verdict.ACCEPT


def pcond_levels(eps: float, cfg: Config | None = None):
    """Dyadic ``(alpha, beta)`` grid of the pair sweep.

    When ``d_TV(D, D*) >= eps`` and the marginal test passed, the pair
    deviation has mean at least ``eps / 32``; the grid floors are the
    matching :func:`reverse_markov_floors` times the config multipliers.
    """
    cfg = cfg or DEFAULT_CONFIG
    alpha_floor, product_floor = reverse_markov_floors(eps / 32.0)
    return dyadic_levels(
        eps, cfg.pcond_alpha_floor_mult * alpha_floor, cfg.pcond_product_floor_mult * product_floor
    )


def pcond_id(handle: _Access, dstar: AnyDistribution, eps: float, cfg: Config | None = None) -> Verdict:
    """Test ``D = D*`` against ``d_TV(D, D*) >= eps`` with SAMP and PAIRCOND.

    Parameters
    ----------
    handle : OracleHandle
        Access to the unknown ``D``; only SAMP and PAIRCOND are used.
    dstar : Distribution or PiecewiseDistribution
        Known reference over the same domain.
    eps : float
        Distance parameter, in ``(0, 1/2]``.

    Returns
    -------
    Verdict
    """
    cfg = cfg or DEFAULT_CONFIG
    if not 0 < eps <= 0.5:
        raise ArgumentError(f"eps must lie in (0, 1/2], got {eps}")
    if dstar.n != handle.n:
        raise ArgumentError("reference and handle sizes differ")
    partition = bucket_partition(dstar, eps)
    sstar = bucket_marginal(dstar, partition)
    m = vv_sample_count(sstar.size, eps, cfg)
    marginal_draws = partition.bucket_of(handle.sample(m))
    if small_support_identity(marginal_draws, sstar, eps, cfg) is Verdict.REJECT:
        return Verdict.REJECT

    sizes = partition.sizes
    log_inv = math.log(1.0 / eps)
    for level in pcond_levels(eps, cfg):
        alpha, beta = level.alpha, level.beta
        r = max(1, math.ceil(cfg.pcond_R_mult * log_inv / beta))
        reps = max(1, math.ceil(cfg.pcond_reps_mult * log_inv / alpha**2))
        i = np.asarray(handle.sample(r), dtype=np.int64)
        ref_i = dstar.mass(i)
        if np.any(ref_i <= 0):
            # D = D* never produces an element of reference mass 0.
            return Verdict.REJECT
        k = partition.bucket_of(i)
        usable = sizes[k - 1] >= 2
        i, k, ref_i = i[usable], k[usable], ref_i[usable]
        if i.size == 0:
            continue
        j = partition.uniform_in(k, handle.rng)
        distinct = i != j
        i, j, ref_i = i[distinct], j[distinct], ref_i[distinct]
        if i.size == 0:
            continue
        ref = ref_i / (ref_i + dstar.mass(j))
        c = handle.pair_counts(i, j, reps) / reps
        if np.any(np.abs(c - ref) >= cfg.pcond_reject_frac * alpha):
            return Verdict.REJECT
    return Verdict.ACCEPT
