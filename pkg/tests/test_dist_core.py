import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from condsense import (
    ArgumentError,
    BlockView,
    OracleHandle,
    SubsetView,
    ZeroMassError,
    cond,
    load_distribution,
    make_distribution,
    make_piecewise,
    pcond,
    restrict,
    samp,
    save_distribution,
)
from conftest import handle_for

weights_strategy = st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 10)), min_size=1, max_size=30).filter(
    lambda w: sum(w) > 0
)


@pytest.mark.parametrize(
    "weights, expected",
    [
        ([1, 1, 1, 1], [0.25] * 4),
        ([2, 0, 0], [1, 0, 0]),
        ([1, 2, 3], [1 / 6, 1 / 3, 1 / 2]),
    ],
)
def test_make_distribution_normalizes(weights, expected):
    np.testing.assert_allclose(make_distribution(weights).probs, expected, atol=1e-15)


@pytest.mark.parametrize("weights", [[0, 0], [1, -1], [], [np.inf, 1], [np.nan]])
def test_make_distribution_rejects_bad_weights(weights):
    with pytest.raises(ArgumentError):
        make_distribution(weights)


@given(weights_strategy)
def test_distribution_invariants(weights):
    d = make_distribution(weights)
    assert np.all(d.probs >= 0)
    assert abs(d.probs.sum() - 1) <= 1e-9
    assert np.all(np.diff(d.cumulative) >= 0)
    assert abs(d.cumulative[-1] - 1) <= 1e-9


def test_samp_point_mass_always_returns_it():
    h = handle_for([0, 0, 1, 0])
    assert {samp(h) for _ in range(200)} == {3}
    assert h.ledger.samp_count == 200


@pytest.mark.parametrize("weights", [[1, 1, 1, 1], [1, 2, 3]])
def test_samp_frequencies(weights):
    h = handle_for(weights, seed=7)
    draws = h.sample(100_000)
    freq = np.bincount(draws, minlength=len(weights) + 1)[1:] / draws.size
    np.testing.assert_allclose(freq, make_distribution(weights).probs, atol=0.01)


def test_cond_singleton_and_full_set():
    h = handle_for([0.1, 0.2, 0.3, 0.4], seed=1)
    assert {cond(h, [3]) for _ in range(50)} == {3}
    draws = h.cond_sample(np.arange(1, 5), 100_000)
    freq = np.bincount(draws, minlength=5)[1:] / draws.size
    np.testing.assert_allclose(freq, [0.1, 0.2, 0.3, 0.4], atol=0.01)
    assert h.ledger.cond_count == 50 + 100_000
    assert h.ledger.samp_count == 0


def test_cond_ratio():
    h = handle_for([0.1, 0.2, 0.3, 0.4], seed=2)
    draws = h.cond_sample([2, 4], 100_000)
    ratio = np.count_nonzero(draws == 4) / np.count_nonzero(draws == 2)
    assert abs(ratio - 2) <= 0.1


@pytest.mark.parametrize(
    "S, error", [([1, 2], ZeroMassError), ([], ArgumentError), ([5], ArgumentError), ([3, 3], ArgumentError)]
)
def test_cond_errors(S, error):
    h = handle_for([0, 0, 1, 1])
    with pytest.raises(error):
        cond(h, S)


@pytest.mark.parametrize("weights, expected", [([1, 1], 0.5), ([0, 1], 0.0), ([0.3, 0.1], 0.75)])
def test_pcond_frequency(weights, expected):
    h = handle_for(weights, seed=3)
    wins = h.pair_counts(np.array([1]), np.array([2]), 100_000)[0]
    assert abs(wins / 100_000 - expected) <= 0.01
    assert h.ledger.pcond_count == 100_000


def test_single_pcond_matches_counts():
    h = handle_for([0, 1])
    assert {pcond(h, 1, 2) for _ in range(50)} == {2}
    assert h.ledger.pcond_count == 50


def test_pcond_errors():
    h = handle_for([0, 0, 1])
    with pytest.raises(ArgumentError):
        pcond(h, 1, 1)
    with pytest.raises(ZeroMassError):
        pcond(h, 1, 2)


def test_cond_pair_agrees_with_pcond():
    h = handle_for([0.3, 0.1, 0.6], seed=4)
    n = 100_000
    via_cond = np.count_nonzero(h.cond_sample([1, 2], n) == 1)
    via_pcond = int(h.pair_counts(np.array([1]), np.array([2]), n)[0])
    sigma = np.sqrt(n * 0.75 * 0.25)
    assert abs(via_cond - via_pcond) <= 3 * np.sqrt(2) * sigma


def test_determinism_of_equal_call_traces():
    def trace(seed):
        h = handle_for([0.1, 0.2, 0.3, 0.4], seed=seed)
        return (
            h.sample(20).tolist(),
            h.cond_sample([1, 3], 20).tolist(),
            h.pair_counts(np.array([1, 2]), np.array([3, 4]), 50).tolist(),
            h.geometric_sums(np.array([1]), np.array([4]), 30, 200).tolist(),
        )

    assert trace(5) == trace(5)
    assert trace(5) != trace(6)


def test_handle_seed_split_by_ordinal():
    d = make_distribution(np.ones(100))
    a = OracleHandle(d, seed=9, ordinal=0).sample(10)
    b = OracleHandle(d, seed=9, ordinal=1).sample(10)
    c = OracleHandle(d, seed=9 ^ 1, ordinal=0).sample(10)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(b, c)


def test_ledger_counts_every_call():
    h = handle_for(np.ones(10))
    h.sample()
    h.sample(5)
    h.sample_counts(7)
    h.count_in([1, 2], 3)
    h.cond_sample([1, 2])
    h.cond_sample([1, 2], 4)
    h.pair(1, 2)
    h.pair_counts(np.array([1, 2]), np.array([3, 4]), np.array([2, 3]))
    h.pair_window_hits(np.array([1]), np.array([2]), 10, 4, 0, 5)
    assert (h.ledger.samp_count, h.ledger.cond_count, h.ledger.pcond_count) == (16, 5, 1 + 5 + 40)


def test_ledger_rejects_unknown_or_negative():
    h = handle_for([1, 1])
    with pytest.raises(ArgumentError):
        h.ledger.charge("samp", -1)
    with pytest.raises(ArgumentError):
        h.ledger.charge("oracle", 1)


def test_ledger_is_monotone_during_a_run():
    h = handle_for(np.arange(1, 21), seed=1)
    seen = []
    for _ in range(20):
        h.sample(3)
        h.pair_counts(np.array([1]), np.array([2]), 4)
        h.cond_sample([3, 4, 5], 2)
        seen.append(h.ledger.snapshot())
    for a, b in zip(seen, seen[1:]):
        assert a.samp_count <= b.samp_count and a.cond_count <= b.cond_count and a.pcond_count <= b.pcond_count


def test_pair_window_hits_matches_direct_simulation():
    # One batched draw versus the explicit batches it replaces.
    h = handle_for([0.3, 0.1], seed=11)
    batches, reps, lo, hi = 20_000, 40, 25, 32
    batched = int(h.pair_window_hits(np.array([1]), np.array([2]), reps, batches, lo, hi)[0])
    counts = np.random.default_rng(0).binomial(reps, 0.75, size=batches)
    direct = int(np.count_nonzero((counts >= lo) & (counts <= hi)))
    p = stats.binom.cdf(hi, reps, 0.75) - stats.binom.cdf(lo - 1, reps, 0.75)
    sigma = np.sqrt(batches * p * (1 - p))
    assert abs(batched - batches * p) <= 4 * sigma
    assert abs(direct - batches * p) <= 4 * sigma


@pytest.mark.parametrize("ratio", [0.25, 1.0, 4.0])
def test_geometric_sums_mean_and_charge(ratio):
    h = handle_for([ratio, 1.0], seed=13)
    draws = 50_000
    total = int(h.geometric_sums(np.array([1]), np.array([2]), 10**6, draws)[0])
    # Each draw makes G + 1 calls; G is geometric with mean `ratio`.
    assert abs(total / draws - ratio) <= 4 * np.sqrt(ratio * (1 + ratio) / draws)
    assert h.ledger.pcond_count == total + draws


def test_restrict_examples():
    np.testing.assert_allclose(restrict(make_distribution([1, 1, 1, 1]), [1, 2]).probs, [0.5, 0.5])
    r = restrict(make_distribution([0.1, 0.2, 0.3, 0.4]), [2, 4])
    np.testing.assert_allclose(r.probs, [1 / 3, 2 / 3])
    np.testing.assert_array_equal(r.index_map, [2, 4])
    with pytest.raises(ZeroMassError):
        restrict(make_distribution([0, 1]), [1])


@given(weights_strategy.filter(lambda w: len(w) >= 3), st.data())
def test_restrict_composes_and_preserves_ratios(weights, data):
    d = make_distribution(weights)
    outer = data.draw(st.lists(st.sampled_from(range(1, d.n + 1)), min_size=1, unique=True))
    if d.mass(outer).sum() <= 0:
        return
    once = restrict(d, outer)
    inner_local = data.draw(st.lists(st.sampled_from(range(1, once.n + 1)), min_size=1, unique=True))
    if once.mass(inner_local).sum() <= 0:
        return
    twice = restrict(once, inner_local)
    direct = restrict(d, once.index_map[np.asarray(inner_local) - 1])
    np.testing.assert_allclose(twice.probs, direct.probs, atol=1e-12)
    np.testing.assert_array_equal(twice.index_map, direct.index_map)
    base = twice.index_map
    for a in range(twice.n):
        for b in range(twice.n):
            if d.prob(int(base[b])) > 0 and twice.probs[b] > 0:
                assert twice.probs[a] / twice.probs[b] == pytest.approx(
                    d.prob(int(base[a])) / d.prob(int(base[b])), rel=1e-12
                )


def test_piecewise_matches_dense():
    pw = make_piecewise([3, 1, 4], [1.0, 5.0, 0.5])
    dense = pw.to_dense()
    assert pw.n == 8
    items = np.arange(1, 9)
    np.testing.assert_allclose(pw.mass(items), dense.probs, atol=1e-15)
    for lo in range(1, 9):
        for hi in range(lo, 9):
            assert pw.range_mass(lo, hi) == pytest.approx(dense.range_mass(lo, hi), abs=1e-14)
    draws = pw.sample(np.random.default_rng(0), 100_000)
    freq = np.bincount(draws, minlength=9)[1:] / draws.size
    np.testing.assert_allclose(freq, dense.probs, atol=0.01)


def test_piecewise_scales_to_large_domains():
    pw = make_piecewise([10**7 - 1, 1], [1.0, 10.0**7])
    assert pw.n == 10**7
    assert pw.prob(10**7) == pytest.approx(0.5)
    assert pw.range_mass(1, 10**7 - 1) == pytest.approx(0.5)


def test_subset_view_is_conditional_distribution():
    h = handle_for([0.1, 0.2, 0.3, 0.4], seed=3)
    view = SubsetView(h, [2, 4])
    draws = view.sample(60_000)
    assert view.n == 2
    assert abs(np.mean(draws == 1) - 1 / 3) <= 0.01
    np.testing.assert_array_equal(view.base_elements([1, 2]), [2, 4])
    assert h.ledger.cond_count == 60_000 and h.ledger.samp_count == 0
    # pair queries act on the underlying elements
    wins = view.pair_counts(np.array([1]), np.array([2]), 40_000)[0]
    assert abs(wins / 40_000 - 1 / 3) <= 0.01
    assert h.ledger.pcond_count == 40_000


def test_block_view_charges_cond_and_uses_block_masses():
    h = handle_for([0.1, 0.2, 0.3, 0.4], seed=4)
    view = BlockView.from_sets(h, [[1, 2], [3], [4]])
    intervals = BlockView.from_intervals(h, [(1, 2), (3, 3), (4, 4)])
    np.testing.assert_allclose(view._all_weights(), intervals._all_weights())
    view.sample(10)
    view.pair_counts(np.array([1]), np.array([3]), 5)
    assert h.ledger.cond_count == 15 and h.ledger.pcond_count == 0


def test_block_view_cond_matches_union_cond():
    # A block-level COND query equals COND on the union of the blocks followed by lookup.
    weights = np.random.default_rng(5).dirichlet(np.ones(12))
    h = handle_for(weights, seed=5)
    blocks = [np.arange(1, 4), np.arange(4, 9), np.arange(9, 13)]
    view = BlockView.from_sets(h, blocks)
    draws = view.cond_sample([1, 3], 100_000)
    observed = [np.count_nonzero(draws == 1), np.count_nonzero(draws == 3)]
    masses = np.array([weights[b - 1].sum() for b in (blocks[0], blocks[2])])
    expected = 100_000 * masses / masses.sum()
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_cond_cache_is_bounded(tmp_path):
    from condsense import Config

    h = handle_for(np.ones(50), cfg=Config(cond_cache_size=4))
    for start in range(1, 20):
        h.cond_sample([start, start + 1])
    assert len(h._cache) == 4


def test_load_save_round_trip(tmp_path):
    d = make_distribution([1, 2, 3, 4])
    path = tmp_path / "d.csv"
    save_distribution(d, path)
    np.testing.assert_allclose(load_distribution(path).probs, d.probs, atol=1e-15)
    jpath = tmp_path / "d.json"
    jpath.write_text(json.dumps([1, 1, 2]))
    np.testing.assert_allclose(load_distribution(jpath).probs, [0.25, 0.25, 0.5])


@pytest.mark.parametrize(
    "text",
    ["i,p\n1,0.5\n", "index,prob\n2,0.5\n", "index,prob\n1,-1\n2,2\n", "index,prob\n"],
)
def test_load_rejects_malformed_csv(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ArgumentError):
        load_distribution(path)
