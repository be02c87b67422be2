"""Exact reference values for the quantities the testers estimate.

Closed-form quantities (TV distance, weighted min-sums, the witness and
pair expectations) work for any domain size.  Distances to the monotone
and exponential classes are linear programs solved with HiGHS through
:func:`scipy.optimize.linprog`; their size is capped by ``max_n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .dist_core import ArgumentError, Distribution, PiecewiseDistribution, make_distribution

__all__ = [
    "LP_MAX_N",
    "LPResult",
    "TruthError",
    "exact_tv",
    "tv_identities",
    "exact_min_sum",
    "exact_dist_to_monotone",
    "exact_dist_to_expo",
    "expo_envelope",
    "expo_witness_expectation",
    "pair_expectation",
    "high_mass_fraction",
]

LP_MAX_N = 5000


class TruthError(RuntimeError):
    """The LP solver failed on a problem that is always feasible."""


@dataclass(frozen=True)
class LPResult:
    """Optimal value of a distance-to-class program and the nearest member.

    Parameters
    ----------
    optimum : float
        ``min d_TV(input, member)`` over the class.
    witness : Distribution
        A minimizing member.
    """

    optimum: float
    witness: Distribution


def _probs(d: Distribution | PiecewiseDistribution | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(d, Distribution):
        return d.probs
    if isinstance(d, PiecewiseDistribution):
        return d.to_dense().probs
    return make_distribution(d).probs


def _pair(d1, d2) -> tuple[np.ndarray, np.ndarray]:
    p, q = _probs(d1), _probs(d2)
    if p.shape != q.shape:
        raise ArgumentError(f"domain sizes differ: {p.size} vs {q.size}")
    return p, q


def exact_tv(d1, d2) -> float:
    """``0.5 * sum |d1(i) - d2(i)|``."""
    p, q = _pair(d1, d2)
    return float(0.5 * np.abs(p - q).sum())


def tv_identities(d1, d2) -> dict[str, float]:
    """The four equivalent forms of the TV distance.

    Returns
    -------
    dict
        ``half_l1``, ``excess`` (``sum max(0, d1 - d2)``), ``deficit``
        (``sum max(0, d2 - d1)``) and ``one_minus_overlap``
        (``1 - sum min(d1, d2)``).
    """
    p, q = _pair(d1, d2)
    return {
        "half_l1": float(0.5 * np.abs(p - q).sum()),
        "excess": float(np.maximum(0.0, p - q).sum()),
        "deficit": float(np.maximum(0.0, q - p).sum()),
        "one_minus_overlap": float(1.0 - np.minimum(p, q).sum()),
    }


def exact_min_sum(d1, d2, c1: float, c2: float) -> float:
    """``sum min(c1 * d1(i), c2 * d2(i))``.

    Examples
    --------
    >>> exact_min_sum([0.5, 0.5], [0.8, 0.2], 1.0, 0.5)
    0.5
    """
    if not (0 <= c1 <= 1 and 0 <= c2 <= 1):
        raise ArgumentError("c1 and c2 must lie in [0, 1]")
    p, q = _pair(d1, d2)
    return float(np.minimum(c1 * p, c2 * q).sum())


def _l1_projection(q: np.ndarray, chain: sparse.spmatrix, max_n: int) -> LPResult:
    """Minimize ``0.5 * |q - p|_1`` over ``p >= 0``, ``sum p = 1``, ``chain @ p <= 0``.

    Variables are ``(p, t)`` with ``t >= |q - p|`` componentwise.
    """
    n = q.size
    if n > max_n:
        raise ArgumentError(f"exact LP oracles are capped at n = {max_n}, got {n}")
    eye = sparse.identity(n, format="csr")
    zeros = sparse.csr_matrix((chain.shape[0], n))
    a_ub = sparse.vstack(
        [
            sparse.hstack([eye, -eye]),  # p - t <= q
            sparse.hstack([-eye, -eye]),  # -p - t <= -q
            sparse.hstack([chain, zeros]),
        ],
        format="csr",
    )
    b_ub = np.concatenate([q, -q, np.zeros(chain.shape[0])])
    a_eq = sparse.hstack([sparse.csr_matrix(np.ones((1, n))), sparse.csr_matrix((1, n))], format="csr")
    cost = np.concatenate([np.zeros(n), 0.5 * np.ones(n)])
    res = linprog(
        cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method="highs"
    )
    if res.status != 0:
        raise TruthError(f"LP solver failed: {res.message}")
    p = np.clip(res.x[:n], 0.0, None)
    witness = make_distribution(p)
    return LPResult(optimum=float(0.5 * np.abs(q - witness.probs).sum()), witness=witness)


def exact_dist_to_monotone(d, max_n: int = LP_MAX_N) -> LPResult:
    """TV distance to the closest non-increasing distribution.

    Examples
    --------
    >>> round(exact_dist_to_monotone([0.2, 0.8]).optimum, 9)
    0.3
    """
    q = _probs(d)
    n = q.size
    if n == 1:
        return LPResult(optimum=0.0, witness=make_distribution(q))
    # p_{i+1} - p_i <= 0
    chain = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")
    return _l1_projection(q, chain, max_n)


def _ratios(n: int, alpha: float, ratios: Sequence[float] | np.ndarray | None) -> np.ndarray:
    if ratios is None:
        if alpha < 0:
            raise ArgumentError("alpha must be non-negative")
        return np.full(n - 1, 1.0 + alpha)
    r = np.asarray(ratios, dtype=np.float64)
    if r.shape != (n - 1,) or np.any(r < 0):
        raise ArgumentError(f"ratios must be {n - 1} non-negative values")
    return r


def exact_dist_to_expo(
    q, alpha: float, ratios: Sequence[float] | np.ndarray | None = None, max_n: int = LP_MAX_N
) -> LPResult:
    """TV distance to ``{p : p_{k+1} <= rho_k p_k}``.

    Parameters
    ----------
    q : distribution over ``[ell]``
    alpha : float
        With ``ratios=None`` every bound is ``rho_k = 1 + alpha``.
    ratios : array, optional
        Per-step bounds ``rho_1..rho_{ell-1}``.

    Examples
    --------
    >>> round(exact_dist_to_expo([0.0, 1.0], 0.0).optimum, 9)
    0.5
    """
    probs = _probs(q)
    n = probs.size
    if n == 1:
        return LPResult(optimum=0.0, witness=make_distribution(probs))
    rho = _ratios(n, alpha, ratios)
    chain = sparse.diags([-rho, np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")
    return _l1_projection(probs, chain, max_n)


def expo_envelope(q, alpha: float) -> tuple[Distribution, float]:
    """Smallest pointwise majorant ``q'_i = max_{s >= i} q_s / (1+alpha)^(s-i)``.

    Returns
    -------
    witness : Distribution
        ``q'`` normalized; it has the exponential property.
    excess : float
        ``sum (q' - q)``; the distance of ``q`` to the class is at most
        twice this value.
    """
    probs = _probs(q)
    env = probs.copy()
    factor = 1.0 + alpha
    for i in range(probs.size - 2, -1, -1):
        env[i] = max(probs[i], env[i + 1] / factor)
    return make_distribution(env), float((env - probs).sum())


def expo_witness_expectation(q, alpha: float, ratios: Sequence[float] | np.ndarray | None = None) -> float:
    """``sum_i q_i * max(0, 1 - rho_{i-1} q_{i-1} / q_i)``, with the ``i = 1`` term 0.

    Terms with ``q_i = 0`` carry no weight and are skipped.

    Examples
    --------
    >>> round(expo_witness_expectation([1/3, 2/3], 0.0), 12)
    0.333333333333
    """
    probs = _probs(q)
    n = probs.size
    if n == 1:
        return 0.0
    rho = _ratios(n, alpha, ratios)
    cur, prev = probs[1:], probs[:-1]
    pos = cur > 0
    terms = np.zeros(n - 1)
    terms[pos] = cur[pos] * np.maximum(0.0, 1.0 - rho[pos] * prev[pos] / cur[pos])
    return float(terms.sum())


def pair_expectation(p, pstar) -> float:
    """``E_{i ~ p, j ~ U} |p(i)/(p(i)+p(j)) - p*(i)/(p*(i)+p*(j))|`` with ``0/0 = 0``.

    Examples
    --------
    >>> round(pair_expectation([0.8, 0.2], [0.5, 0.5]), 12)
    0.15
    """
    a, b = _pair(p, pstar)
    m = a.size

    def share(v: np.ndarray) -> np.ndarray:
        total = v[:, None] + v[None, :]
        out = np.zeros_like(total)
        np.divide(v[:, None] * np.ones_like(total), total, out=out, where=total > 0)
        return out

    diff = np.abs(share(a) - share(b))
    return float((a[:, None] * diff).sum() / m)


def high_mass_fraction(d, kappa: float) -> float:
    """``P_{x ~ D}[D(x) >= 1 / (kappa N)]``.

    When this is at least ``1 - kappa``, ``d_TV(D, U) >= 1 - 2 kappa``.
    """
    if kappa <= 0:
        raise ArgumentError("kappa must be positive")
    probs = _probs(d)
    return float(probs[probs >= 1.0 / (kappa * probs.size)].sum())
