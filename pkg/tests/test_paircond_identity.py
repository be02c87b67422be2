import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from condsense import ArgumentError, OracleHandle, Verdict, exact_tv, make_distribution, make_piecewise
from condsense.harness import AppendixA
from condsense.paircond_identity import (
    BucketMarginal,
    bucket_marginal,
    bucket_partition,
    chi_square_statistic,
    null_threshold,
    pcond_id,
    small_support_identity,
    vv_sample_count,
)
from conftest import rate

# -- buckets ------------------------------------------------------------------------


def test_uniform_reference_fills_one_bucket():
    n = 1000
    bp = bucket_partition(make_distribution(np.ones(n)), 0.2)
    assert bp.K == math.ceil(math.log2(10 * n / 0.2))
    k = math.ceil(math.log2(n))
    assert bp.sizes[k - 1] == n and bp.sizes.sum() == n
    assert 2.0**-k < 1 / n <= 2.0 ** (1 - k)


def test_bucket_examples():
    bp = bucket_partition(make_distribution([0.5, 0.3, 0.2]), 0.5)
    assert bp.bucket_of([1, 2, 3]).tolist() == [2, 2, 3]
    bp = bucket_partition(make_distribution([0.5, 0.0, 0.5]), 0.5)
    assert bp.bucket_of(2) == bp.K + 1
    np.testing.assert_array_equal(bp.members(bp.K + 1), [2])


@given(st.lists(st.one_of(st.just(0.0), st.floats(1e-9, 1)), min_size=1, max_size=60), st.floats(0.01, 0.5))
def test_bucket_invariants(weights, eps):
    if sum(weights) <= 0:
        return
    d = make_distribution(weights)
    bp = bucket_partition(d, eps)
    assert bp.sizes.sum() == d.n
    members = np.concatenate([bp.members(k) for k in range(1, bp.K + 2)])
    assert sorted(members.tolist()) == list(range(1, d.n + 1))
    for k in range(1, bp.K + 1):
        p = d.probs[bp.members(k) - 1]
        assert np.all((2.0**-k < p) & (p <= 2.0 ** (1 - k)))
    assert np.all(d.probs[bp.members(bp.K + 1) - 1] <= eps / (10 * d.n))
    np.testing.assert_allclose(bucket_marginal(d, bp).masses.sum(), 1.0)


def test_piecewise_reference_matches_dense():
    lengths, weights = [3, 5, 2], [0.1, 0.05, 0.175]
    sparse = make_piecewise(lengths, weights)
    dense = make_distribution(np.repeat(weights, lengths))
    a, b = bucket_partition(sparse, 0.2), bucket_partition(dense, 0.2)
    items = np.arange(1, 11)
    np.testing.assert_array_equal(a.bucket_of(items), b.bucket_of(items))
    np.testing.assert_allclose(bucket_marginal(sparse, a).masses, bucket_marginal(dense, b).masses)


def test_uniform_in_bucket():
    w = np.r_[np.full(5, 4.0), np.ones(20), np.full(5, 4.0)]
    bp = bucket_partition(make_distribution(w), 0.2)
    heavy = int(bp.bucket_of(1))
    expected = np.r_[1:6, 26:31]
    np.testing.assert_array_equal(bp.members(heavy), expected)
    draws = bp.uniform_in(np.full(40_000, heavy), np.random.default_rng(1))
    observed = np.array([np.count_nonzero(draws == e) for e in expected])
    assert observed.sum() == draws.size
    assert stats.chisquare(observed).pvalue > 0.01
    with pytest.raises(ArgumentError):
        bp.uniform_in(np.array([1]), np.random.default_rng(0))


# -- marginal test ------------------------------------------------------------------


def test_chi_square_statistic_values():
    assert chi_square_statistic(np.array([5, 5]), np.array([0.5, 0.5])) == pytest.approx(-2.0)
    # Buckets of reference mass 0 are left out.
    assert chi_square_statistic(np.array([6, 4, 0]), np.array([0.5, 0.5, 0.0])) == pytest.approx(
        ((1 - 6) + (1 - 4)) / 5
    )


def test_vv_sample_count_formula():
    assert vv_sample_count(4, 0.5) == math.ceil(0.5 * 2 / 0.05**2)


def _draws(probs, m, rng):
    return rng.choice(np.arange(1, len(probs) + 1), size=m, p=probs)


def test_small_support_accepts_reference_samples(rng):
    sstar = BucketMarginal(np.array([0.4, 0.3, 0.2, 0.1]))
    m = vv_sample_count(4, 0.2)
    verdicts = [small_support_identity(_draws(sstar.masses, m, rng), sstar, 0.2) for _ in range(200)]
    assert rate(v is Verdict.ACCEPT for v in verdicts) >= 0.85


def test_small_support_rejects_shifted_mass(rng):
    sstar = BucketMarginal(np.array([0.3, 0.3, 0.2, 0.2]))
    shifted = np.array([0.5, 0.1, 0.2, 0.2])
    m = vv_sample_count(4, 0.5)
    verdicts = [small_support_identity(_draws(shifted, m, rng), sstar, 0.5) for _ in range(100)]
    assert rate(v is Verdict.REJECT for v in verdicts) >= 0.9


def test_small_support_binary_boundary_power():
    # With two buckets the statistic depends on one binomial count: exact size and power.
    sstar = BucketMarginal(np.array([0.5, 0.5]))
    eps = 0.2
    m = vv_sample_count(2, eps)
    x = np.arange(m + 1)
    statistic = np.array([chi_square_statistic(np.array([c, m - c]), sstar.masses) for c in x])
    rejected = statistic > null_threshold(sstar, m)
    size = stats.binom.pmf(x, m, 0.5)[rejected].sum()
    power = stats.binom.pmf(x, m, 0.5 + eps / 10)[rejected].sum()
    assert size <= 0.1
    # Informational boundary case: the configured sample budget leaves power near 1/2.
    assert 0.45 <= power <= 0.6


def test_small_support_zero_mass_bucket_rejects():
    sstar = BucketMarginal(np.array([0.5, 0.5, 0.0]))
    samples = np.r_[np.ones(1000, dtype=int), np.full(999, 2), [3]]
    assert small_support_identity(samples, sstar, 0.5) is Verdict.REJECT


def test_small_support_input_checks():
    sstar = BucketMarginal(np.array([0.5, 0.5]))
    with pytest.raises(ArgumentError):
        small_support_identity(np.ones(10, dtype=int), sstar, 0.2)
    with pytest.raises(ArgumentError):
        small_support_identity(np.full(10**5, 3), sstar, 0.2)


# -- PcondId ------------------------------------------------------------------------


def _verdicts(dist, dstar, eps, trials=20):
    return [pcond_id(OracleHandle(dist, seed=s), dstar, eps) for s in range(trials)]


def test_pcond_id_accepts_reference():
    u = make_distribution(np.ones(10_000))
    assert rate(v is Verdict.ACCEPT for v in _verdicts(u, u, 0.2)) >= 2 / 3


def test_pcond_id_rejects_appendix_member():
    member, meta = AppendixA(2, 4, 0.4, (0, 1)).build()
    dstar = meta["dstar"]
    assert exact_tv(member, dstar) == pytest.approx(0.2, abs=1e-12)
    assert rate(v is Verdict.ACCEPT for v in _verdicts(dstar, dstar, 0.2)) >= 2 / 3
    assert rate(v is Verdict.REJECT for v in _verdicts(member, dstar, 0.2)) >= 2 / 3


def test_pcond_id_rejects_within_bucket_perturbation():
    # Bucket masses match exactly, so only the pair sweep can reject.
    n = 1000
    w = np.ones(n)
    w[::2], w[1::2] = 1.5, 0.5
    d, ref = make_distribution(w), make_distribution(np.ones(n))
    bp = bucket_partition(ref, 0.2)
    np.testing.assert_allclose(bucket_marginal(d, bp).masses, bucket_marginal(ref, bp).masses)
    assert exact_tv(d, ref) >= 0.2
    assert rate(v is Verdict.REJECT for v in _verdicts(d, ref, 0.2)) >= 2 / 3


def test_pcond_id_uses_no_cond_queries():
    member, meta = AppendixA(2, 4, 0.4, (1, 0)).build()
    for dist in (member, meta["dstar"]):
        for seed in range(5):
            h = OracleHandle(dist, seed=seed)
            pcond_id(h, meta["dstar"], 0.2)
            assert h.ledger.cond_count == 0
            assert h.ledger.samp_count > 0


def test_pcond_id_rejects_mass_outside_reference_support():
    ref = make_distribution(np.r_[np.ones(50), np.zeros(50)])
    d = make_distribution(np.ones(100))
    assert all(v is Verdict.REJECT for v in _verdicts(d, ref, 0.2, trials=5))


def test_pcond_id_input_checks():
    u = make_distribution(np.ones(10))
    with pytest.raises(ArgumentError):
        pcond_id(OracleHandle(u), u, 0.6)
    with pytest.raises(ArgumentError):
        pcond_id(OracleHandle(u), make_distribution(np.ones(11)), 0.2)
