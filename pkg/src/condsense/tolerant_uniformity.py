"""Tolerant uniformity testing with SAMP and PAIRCOND queries.

:func:`tolerant_unif` estimates ``d_TV(D, U)`` to additive ``O(eps)`` with a
number of queries that does not depend on the domain size.  The pipeline:

1. :func:`constant_approx` finds candidate anchors ``x`` whose mass is known
   within a factor ``1 +- 0.1``.
2. Given an anchor of mass close to ``1/N``, :func:`oracle_classify` labels
   every element as light (-1), comparable (0) or heavy (+1) relative to it.
3. :func:`given_good_elt` estimates the light and heavy contributions from
   label frequencies and the comparable contribution with
   :func:`estimate_close_terms`, which in turn relies on
   :func:`single_element` and :func:`z_estimate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .dist_core import ArgumentError, _Access
from .primitives import (
    INFINITY,
    Ratio,
    compare_many,
    compare_reps,
    compare_window_hits,
    geometric_cap,
)

__all__ = [
    "AnchorEstimate",
    "OracleVerdict",
    "UnifResult",
    "constant_approx",
    "oracle_classify",
    "single_element",
    "z_estimate",
    "estimate_close_terms",
    "given_good_elt",
    "tolerant_unif",
    "tolerant_unif_detailed",
]


@dataclass(frozen=True)
class AnchorEstimate:
    """Candidate anchor element and its mass estimates.

    Parameters
    ----------
    x : int
        The anchor element.
    d_hat : float
        Coarse estimate of ``D(x)`` (factor ``1 +- 0.1``).
    d_tilde : float or None
        Refined estimate from :func:`single_element`.
    gamma1_tilde : float or None
        Estimated probability that a uniform element is labelled 0.
    """

    x: int
    d_hat: float
    d_tilde: float | None = None
    gamma1_tilde: float | None = None


@dataclass(frozen=True)
class OracleVerdict:
    """Label of an element relative to the anchor: -1, 0 or +1."""

    value: int

    def __post_init__(self) -> None:
        if self.value not in (-1, 0, 1):
            raise ArgumentError(f"verdict must be -1, 0 or +1, got {self.value}")


@dataclass(frozen=True)
class UnifResult:
    """Estimate together with the branch of :func:`tolerant_unif` that produced it."""

    estimate: float
    branch: str


def _cfg(cfg: Config | None) -> Config:
    return cfg if cfg is not None else DEFAULT_CONFIG


MAX_EPS = 0.25


def _check_eps(eps: float) -> float:
    if not 0 < eps <= MAX_EPS:
        raise ArgumentError(f"eps must lie in (0, {MAX_EPS}], got {eps}")
    return math.log(1.0 / eps)


def _matches(xs: np.ndarray, pool: np.ndarray) -> int:
    """Number of pairs ``(x, p)`` with ``x`` in ``xs``, ``p`` in ``pool`` and ``x == p``."""
    values, counts = np.unique(pool, return_counts=True)
    pos = np.clip(np.searchsorted(values, xs), 0, values.size - 1)
    return int(np.where(values[pos] == xs, counts[pos], 0).sum())


def _uniform(handle: _Access, size: int) -> np.ndarray:
    return handle.rng.integers(1, handle.n + 1, size=size)


# ---------------------------------------------------------------------------
# ConstantApprox
# ---------------------------------------------------------------------------


def constant_approx(
    handle: _Access,
    eps: float,
    cfg: Config | None = None,
    R_mult: float | None = None,
    first_only: bool = False,
) -> list[AnchorEstimate]:
    """Find elements whose mass can be estimated within a factor ``1 +- 0.1``.

    Draws ``R`` elements ``x_r`` and ``w_r`` from ``D`` and ``y_r`` uniformly.
    For each ``x_r``, ``d`` and ``u`` are the fractions of ``w`` and ``y``
    whose comparison with ``x_r`` lands in the acceptance window; the
    estimate is ``d / (N u)``.

    Parameters
    ----------
    handle : oracle access
    eps : float
        Accuracy, in ``(0, 1/4]``.
    cfg : Config, optional
    R_mult : float, optional
        Override for ``cfg.const_approx_R_mult``.
    first_only : bool
        Return only the first qualifying pair.  Rows after it are charged to
        the ledger but not simulated since they cannot affect the output.

    Returns
    -------
    list of AnchorEstimate
        Pairs with ``d_hat`` in ``[0.9 eps / N, 1.1 / (eps N)]``, in draw order.
    """
    cfg = _cfg(cfg)
    log_inv = _check_eps(eps)
    mult = cfg.const_approx_R_mult if R_mult is None else R_mult
    R = max(1, math.ceil(mult * log_inv ** 2 / eps))
    n = handle.n
    xs = np.asarray(handle.sample(R))
    ws = np.asarray(handle.sample(R))
    ys = _uniform(handle, R)
    threshold = eps / (cfg.const_approx_threshold_div * log_inv)
    low, high = 0.9 * eps / n, 1.1 / (eps * n)
    gamma = cfg.const_approx_gamma
    window = cfg.const_approx_window

    # Comparisons against repeated values are grouped into batches; this is
    # the same distribution and much cheaper on small domains.
    w_vals, w_counts = np.unique(ws, return_counts=True)
    y_vals, y_counts = np.unique(ys, return_counts=True)

    def pool_hits(rows: np.ndarray, vals: np.ndarray, counts: np.ndarray) -> np.ndarray:
        X = np.repeat(xs[rows], vals.size)
        hits = compare_window_hits(
            handle, X, np.tile(vals, rows.size), np.tile(counts, rows.size),
            gamma, eps, window, True, cfg,
        )
        return hits.reshape(rows.size, vals.size).sum(axis=1) / R

    def row_hits(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return pool_hits(rows, w_vals, w_counts), pool_hits(rows, y_vals, y_counts)

    def accept(d: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ok = (d > threshold) & (u > threshold)
        est = np.zeros(d.shape)
        est[ok] = d[ok] / (n * u[ok])
        ok &= (est >= low) & (est <= high)
        return ok, est

    if not first_only:
        found: list[AnchorEstimate] = []
        chunk = max(1, 2_000_000 // max(w_vals.size, y_vals.size, 1))
        for start in range(0, R, chunk):
            rows = np.arange(start, min(R, start + chunk))
            d, u = row_hits(rows)
            ok, est = accept(d, u)
            found.extend(AnchorEstimate(int(xs[r]), float(est[i])) for i, r in enumerate(rows) if ok[i])
        return found

    k = compare_reps(gamma, eps, cfg)
    for r in range(R):
        d, u = row_hits(np.array([r]))
        ok, est = accept(d, u)
        if ok[0]:
            rest = xs[r + 1:]
            if rest.size:
                same = _matches(rest, ws) + _matches(rest, ys)
                handle._charge(handle.pair_kind, (2 * rest.size * R - same) * k)
            return [AnchorEstimate(int(xs[r]), float(est[0]))]
    return []


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


def _check_anchor(handle: _Access, anchor: AnchorEstimate) -> None:
    n = handle.n
    if not 5.0 / (9.0 * n) <= anchor.d_hat <= 9.0 / (5.0 * n):
        raise ArgumentError("anchor estimate must lie in [5/(9N), 9/(5N)]")


def _classify_many(handle: _Access, eps: float, x: int, zs: np.ndarray, cfg: Config) -> np.ndarray:
    zs = np.asarray(zs, dtype=np.int64)
    alpha, infinite = compare_many(handle, zs, np.full(zs.shape, x), cfg.oracle_gamma, eps, cfg)
    out = np.zeros(zs.shape, dtype=np.int64)
    out[~infinite & (alpha < cfg.oracle_low)] = -1
    out[infinite | (alpha > cfg.oracle_high)] = 1
    return out


def oracle_classify(
    handle: _Access, eps: float, anchor: AnchorEstimate, z: int, cfg: Config | None = None
) -> OracleVerdict:
    """Label ``z`` by comparing its mass with the anchor's.

    Returns -1 when the estimated ratio ``D(z)/D(x)`` is below
    ``cfg.oracle_low``, +1 when it exceeds ``cfg.oracle_high`` and 0 otherwise.
    """
    cfg = _cfg(cfg)
    _check_eps(eps)
    _check_anchor(handle, anchor)
    return OracleVerdict(int(_classify_many(handle, eps, anchor.x, np.array([z]), cfg)[0]))


# ---------------------------------------------------------------------------
# SingleElement
# ---------------------------------------------------------------------------


def single_element(
    handle: _Access, eps: float, anchor: AnchorEstimate, cfg: Config | None = None
) -> tuple[float, float]:
    """Refine the anchor's mass estimate.

    Let ``gamma2`` be the probability that a draw from ``D`` is labelled 0
    and ``gamma3`` the mean, over uniform ``y`` labelled 0, of the number of
    ``y`` returns before the first ``x`` return.  Then
    ``gamma2 / gamma3 = N * D(x)``.

    Returns
    -------
    gamma1_tilde : float
        Fraction of uniform draws labelled 0.
    d_tilde : float
        Refined estimate of ``D(x)``; falls back to ``anchor.d_hat`` when no
        uniform draw was labelled 0.
    """
    cfg = _cfg(cfg)
    log_inv = _check_eps(eps)
    n = handle.n
    K = max(1, math.ceil(cfg.single_element_K_mult / eps ** 2))
    ys = _uniform(handle, K)
    zs = np.asarray(handle.sample(K))
    vy = _classify_many(handle, eps, anchor.x, ys, cfg)
    vz = _classify_many(handle, eps, anchor.x, zs, cfg)
    accepted = ys[vy == 0]
    gamma1 = accepted.size / K
    gamma2 = float(np.count_nonzero(vz == 0)) / K
    cap = geometric_cap(cfg.oracle_high, eps, cfg)
    same = accepted == anchor.x
    counts = float(np.count_nonzero(same))  # ratio exactly 1 for y = x
    others = accepted[~same]
    if others.size:
        counts += float(handle.geometric_sums(others, np.full(others.size, anchor.x), cap, 1).sum())
    gamma3 = counts / K
    if gamma3 <= 0 or gamma2 <= 0:
        return gamma1, anchor.d_hat
    del log_inv
    return gamma1, gamma2 / (n * gamma3)


# ---------------------------------------------------------------------------
# ZEstimate
# ---------------------------------------------------------------------------


def _z_estimate_many(
    handle: _Access,
    beta: float,
    x: int,
    d_tilde_x: float,
    zs: np.ndarray,
    eps: float,
    cfg: Config,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`z_estimate`; returns ``(estimates, infinite_mask)``."""
    if not 0 < beta <= 1.0 / 1600.0:
        raise ArgumentError(f"beta must lie in (0, 1/1600], got {beta}")
    n = handle.n
    zs = np.asarray(zs, dtype=np.int64)
    est = np.full(zs.shape, 1.0 / n)
    infinite = np.zeros(zs.shape, dtype=bool)
    active = np.ones(zs.shape, dtype=bool)
    i = 1
    while 2.0 ** -i >= cfg.z_estimate_floor_mult * beta and np.any(active):
        idx = np.flatnonzero(active)
        gamma = 2.0 ** -i / cfg.z_estimate_gamma_div
        alpha, inf = compare_many(handle, zs[idx], np.full(idx.size, x), gamma, eps, cfg)
        value = alpha * d_tilde_x
        est[idx] = value
        infinite[idx] = inf
        outside = inf | (value < (1 - 2.0 ** -i) / n) | (value > (1 + 2.0 ** -i) / n)
        active[idx[outside]] = False
        i += 1
    return est, infinite


def z_estimate(
    handle: _Access,
    beta: float,
    anchor: AnchorEstimate,
    z: int,
    eps: float,
    cfg: Config | None = None,
) -> Ratio:
    """Estimate ``D(z)`` with precision adapted to ``|N D(z) - 1|``.

    Compares ``z`` with the anchor at accuracies ``2^-i / 20`` for
    ``i = 1, 2, ...`` and stops as soon as the estimate leaves the band
    ``(1 +- 2^-i) / N`` or ``2^-i`` drops below ``40 beta``.

    Parameters
    ----------
    beta : float
        Target relative precision, in ``(0, 1/1600]``.
    anchor : AnchorEstimate
        Anchor with its refined estimate ``d_tilde``.

    Returns
    -------
    float or INFINITY
    """
    cfg = _cfg(cfg)
    _check_eps(eps)
    d_tilde = anchor.d_tilde if anchor.d_tilde is not None else anchor.d_hat
    est, inf = _z_estimate_many(handle, beta, anchor.x, d_tilde, np.array([z]), eps, cfg)
    return INFINITY if inf[0] else float(est[0])


# ---------------------------------------------------------------------------
# EstimateCloseTerms
# ---------------------------------------------------------------------------


def _band_sum(
    handle: _Access,
    eps: float,
    anchor: AnchorEstimate,
    d_tilde_x: float,
    delta: float,
    sign: int,
    unbounded: bool,
    cfg: Config,
) -> float:
    """One ``W`` term: mean over uniform ``z`` of the signed deviation in a band.

    ``sign`` is +1 or -1 for the bands above or below ``1/N`` and 0 for the
    central band ``|N D(z) - 1| <= delta``.
    """
    n = handle.n
    log_inv = math.log(1.0 / eps)
    C = max(1, math.ceil(cfg.close_terms_C_mult * (delta / eps) ** 2 * log_inv))
    zs = _uniform(handle, C)
    verdict = _classify_many(handle, eps, anchor.x, zs, cfg)
    cand = zs[verdict == 0]
    if cand.size == 0:
        return 0.0
    beta = delta / cfg.close_terms_beta_div
    est, inf = _z_estimate_many(handle, beta, anchor.x, d_tilde_x, cand, eps, cfg)
    dev = np.where(inf, np.inf, n * est - 1.0)
    if sign == 0:
        in_band = ~inf & (np.abs(dev) <= delta)
    else:
        signed = sign * dev
        in_band = signed > delta
        if not unbounded:
            in_band &= signed <= 2 * delta
        if sign < 0:
            in_band &= ~inf
    chosen = cand[in_band]
    if chosen.size == 0:
        return 0.0
    c_prime = max(1, math.ceil(cfg.close_terms_Cprime_mult / delta ** 2))
    cap = geometric_cap(cfg.oracle_high, eps, cfg)
    v_bar = np.ones(chosen.size)
    others = chosen != anchor.x
    if np.any(others):
        sums = handle.geometric_sums(chosen[others], np.full(int(others.sum()), anchor.x), cap, c_prime)
        v_bar[others] = sums / c_prime
    deviation = n * d_tilde_x * v_bar - 1.0
    if sign == 0:
        return float(np.abs(deviation).sum() / C)
    return float(sign * deviation.sum() / C)


def estimate_close_terms(
    handle: _Access, eps: float, anchor: AnchorEstimate, cfg: Config | None = None
) -> float:
    """Estimate ``sum_i s(i) |D(i) - 1/N|`` where ``s(i) = P(label(i) = 0)``.

    Elements are grouped into dyadic bands of ``N D(z) - 1``.  For band
    ``t`` with ``delta = 2^-(t+1)``, about ``(delta/eps)^2 log(1/eps)``
    uniform elements are drawn; those labelled 0 whose :func:`z_estimate`
    places them in the band contribute a geometric-count estimate of their
    deviation.  The first band on each side is unbounded and the central
    band collects ``|N D(z) - 1| <= 2^-T`` so the bands cover all outcomes.

    Returns
    -------
    float
    """
    cfg = _cfg(cfg)
    _check_eps(eps)
    if anchor.d_tilde is None or anchor.gamma1_tilde is None:
        gamma1, d_tilde = single_element(handle, eps, anchor, cfg)
    else:
        gamma1, d_tilde = anchor.gamma1_tilde, anchor.d_tilde
    if gamma1 <= eps:
        return 0.0
    T = max(2, math.ceil(math.log2(gamma1 / eps)) + cfg.close_terms_T_offset)
    total = 0.0
    for t in range(1, T):
        delta = 2.0 ** -(t + 1)
        for sign in (1, -1):
            total += _band_sum(handle, eps, anchor, d_tilde, delta, sign, t == 1, cfg)
    total += _band_sum(handle, eps, anchor, d_tilde, 2.0 ** -T, 0, False, cfg)
    return total


# ---------------------------------------------------------------------------
# GivenGoodElt and the driver
# ---------------------------------------------------------------------------


def given_good_elt(
    handle: _Access, eps: float, anchor: AnchorEstimate, cfg: Config | None = None
) -> float:
    """Estimate ``d_TV(D, U)`` given an anchor of mass close to ``1/N``.

    With ``a, c`` the probabilities that a draw from ``D`` is labelled
    -1 and +1, ``b, d`` the same for a uniform draw and ``e`` the close-terms
    sum, the distance is ``(e + (b - a) + (c - d)) / 2``: light elements
    contribute ``1/N - D(i)`` and heavy ones ``D(i) - 1/N``.
    """
    cfg = _cfg(cfg)
    _check_eps(eps)
    _check_anchor(handle, anchor)
    K = max(1, math.ceil(cfg.given_good_K_mult / eps ** 2))
    zs = np.asarray(handle.sample(K))
    ys = _uniform(handle, K)
    vz = _classify_many(handle, eps, anchor.x, zs, cfg)
    vy = _classify_many(handle, eps, anchor.x, ys, cfg)
    a = np.count_nonzero(vz == -1) / K
    c = np.count_nonzero(vz == 1) / K
    gamma1_from_d = np.count_nonzero(vz == 0) / K
    b = np.count_nonzero(vy == -1) / K
    d = np.count_nonzero(vy == 1) / K
    e = 0.0
    if gamma1_from_d >= cfg.gamma1_accept_mult * eps:
        gamma1, d_tilde = single_element(handle, eps, anchor, cfg)
        if gamma1 >= cfg.gamma1_min_mult * eps:
            refined = replace(anchor, d_tilde=d_tilde, gamma1_tilde=gamma1)
            e = estimate_close_terms(handle, eps, refined, cfg)
    return 0.5 * (e + (b - a) + (c - d))


def tolerant_unif_detailed(handle: _Access, eps: float, cfg: Config | None = None) -> UnifResult:
    """Like :func:`tolerant_unif` but also reports which branch ran.

    Branches are ``"trivial"`` (``N = 1``), ``"no-anchor"``, ``"good-anchor"``
    and ``"threshold-scan"``.
    """
    cfg = _cfg(cfg)
    log_inv = _check_eps(eps)
    del log_inv
    n = handle.n
    if n == 1:
        return UnifResult(0.0, "trivial")
    anchors = constant_approx(handle, eps, cfg)
    if not anchors:
        return UnifResult(1.0, "no-anchor")
    low, high = 5.0 / (9.0 * n), 9.0 / (5.0 * n)
    good = [s for s in anchors if low <= s.d_hat <= high]
    if good:
        best = min(good, key=lambda s: abs(math.log(n * s.d_hat)))
        return UnifResult(given_good_elt(handle, eps, best, cfg), "good-anchor")
    K = max(1, math.ceil(cfg.unif_scan_K_mult / eps ** 2))
    a = b = 0.0
    heavy = [s for s in anchors if s.d_hat >= 1.0 / n]
    if heavy:
        x = min(heavy, key=lambda s: s.d_hat).x
        ys = _uniform(handle, K)
        alpha, inf = compare_many(handle, ys, np.full(K, x), cfg.oracle_gamma, eps, cfg)
        a = np.count_nonzero(inf | (alpha >= cfg.unif_scan_low)) / K
    light = [s for s in anchors if s.d_hat <= 1.0 / n]
    if light:
        x = max(light, key=lambda s: s.d_hat).x
        zs = np.asarray(handle.sample(K))
        alpha, inf = compare_many(handle, zs, np.full(K, x), cfg.oracle_gamma, eps, cfg)
        b = np.count_nonzero(~inf & (alpha <= cfg.unif_scan_high)) / K
    return UnifResult(1.0 - a - b, "threshold-scan")


def tolerant_unif(handle: _Access, eps: float, cfg: Config | None = None) -> float:
    """Estimate ``d_TV(D, U)`` to additive ``O(eps)``.

    Parameters
    ----------
    handle : oracle access
        SAMP and PAIRCOND access to ``D`` over ``[N]``.
    eps : float
        Accuracy, in ``(0, 1/4]``.
    cfg : Config, optional

    Returns
    -------
    float
        Estimate of the distance; within ``cfg.C_tu * eps`` of the truth with
        probability at least 2/3.
    """
    return tolerant_unif_detailed(handle, eps, cfg).estimate
