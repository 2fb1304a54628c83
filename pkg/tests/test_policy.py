import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxmean import (BanditState, BudgetError, DomainError, ExplorationRate, PolicyConfig, RngStream, SystemSpec,
                     run, run_static, select_arm, step, ucb_index)
from maxmean.policy import exploration_value

from conftest import normals20

PLAIN = PolicyConfig(variance_aware=False, warmup_fraction=0.0)


def test_exploration_values():
    assert exploration_value(ExplorationRate.scaled_log(1.0), math.e ** 2) == pytest.approx(2.0)
    assert exploration_value(ExplorationRate.power(0.5), 10**4) == pytest.approx(100.0)
    assert exploration_value(ExplorationRate.power(2 / 3), 10**6) == pytest.approx(1e4)
    assert exploration_value(ExplorationRate.tabulated([1, 10], [0, 9]), 5.5) == pytest.approx(4.5)
    with pytest.raises(DomainError):
        exploration_value(ExplorationRate(), 0)


def test_rate_parsing():
    assert ExplorationRate.parse("log") == ExplorationRate.scaled_log(1.0)
    assert ExplorationRate.parse("log:0.3").param == 0.3
    assert ExplorationRate.parse("pow:0.5") == ExplorationRate.power(0.5)
    assert ExplorationRate.parse("pow:2/3").param == pytest.approx(2 / 3)
    assert str(ExplorationRate.parse("pow:2/3")) == "pow:2/3"


def test_hand_example_indices():
    st_ = BanditState.from_samples([[1.0] * 4, [0.2]], config=PLAIN)
    i1, i2 = ucb_index(st_, 0, 6), ucb_index(st_, 1, 6)
    assert i1 == pytest.approx(1.0 + math.sqrt(2 * math.log(6) / 4))
    assert i2 == pytest.approx(0.2 + math.sqrt(2 * math.log(6)))
    assert round(i1, 4) == 1.9465 and round(i2, 4) == 2.0930
    assert select_arm(st_, 6) == 1


def test_equal_counts_pick_larger_mean():
    st_ = BanditState.from_samples([[1.0], [0.0]], config=PLAIN)
    assert select_arm(st_, 3) == 0


def test_tie_goes_to_lowest_index():
    for va in (True, False):
        cfg = PolicyConfig(variance_aware=va)
        st_ = BanditState.from_samples([[1.0, 2.0]] * 5, config=cfg)
        assert select_arm(st_, 11) == 0


def test_dominant_arm_selected():
    st_ = BanditState.from_samples([[0.0], [100.0], [0.5]], config=PLAIN)
    assert select_arm(st_, 4) == 1


def test_single_arm():
    st_ = BanditState.from_samples([[3.0]], config=PLAIN)
    assert select_arm(st_, 2) == 0
    assert np.isfinite(ucb_index(st_, 0, 2))


def test_index_needs_round_after_init():
    st_ = BanditState.from_samples([[1.0], [2.0]])
    with pytest.raises(DomainError):
        select_arm(st_, 2)


def test_variance_aware_index_formula():
    xs = [1.0, 3.0, 2.0, 6.0]
    st_ = BanditState.from_samples([xs, [0.0]], config=PolicyConfig())
    n = 7
    b = math.sqrt(2 * math.log(n) / 4)
    v = np.mean(np.square(xs)) - np.mean(xs) ** 2 + b
    assert ucb_index(st_, 0, n) == pytest.approx(np.mean(xs) + b * math.sqrt(v))


def test_warmup_cutoff_arithmetic():
    assert PolicyConfig(warmup_fraction=0.1).warmup_cutoff(1000) == 100
    assert PolicyConfig(warmup_fraction=0.1).warmup_cutoff(423) == 43
    assert PolicyConfig(warmup_fraction=0.0).warmup_cutoff(50) == 0


def test_budget_equal_to_k():
    state = run(normals20(), 20, rng=RngStream(1))
    assert state.counts.tolist() == [1] * 20


def test_budget_below_k_rejected():
    with pytest.raises(BudgetError):
        run(normals20(), 19)


@pytest.mark.parametrize("alloc", ["round_robin", "adaptive"])
@pytest.mark.parametrize("va", [True, False])
def test_kernel_matches_python_step_loop(alloc, va):
    arms = [SystemSpec.normal(1.0, 1.0), SystemSpec.bernoulli(0.7), SystemSpec.empirical([0.0, 2.5])]
    n = 200
    cfg = PolicyConfig(ExplorationRate.scaled_log(1.0), va, 0.1, alloc)
    fast = run(arms, n, cfg, RngStream(5), log=True)
    slow = BanditState.empty(3, cfg, cfg.warmup_cutoff(n))
    rng = RngStream(5)
    for r in range(n):
        k, x = step(slow, arms, rng, budget=n)
        assert k == fast.arms[r] and x == fast.values[r]
        assert slow.counts.sum() == r + 1
    for name in ("counts", "sums", "sumsq", "counts_post", "sums_post", "sumsq_post"):
        assert np.array_equal(getattr(fast, name), getattr(slow, name))


def test_round_robin_warmup_cycles():
    cfg = PolicyConfig(warmup_fraction=0.1)
    state = run(normals20(), 1000, cfg, RngStream(2), log=True)
    assert state.arms[:100].tolist() == list(range(20)) * 5


def test_no_warmup_post_equals_full():
    cfg = PolicyConfig(warmup_fraction=0.0)
    state = run(normals20(), 3000, cfg, RngStream(8))
    assert np.array_equal(state.counts, state.counts_post)
    assert np.array_equal(state.sums, state.sums_post)
    assert np.array_equal(state.sumsq, state.sumsq_post)


def test_post_counts_cover_rounds_after_cutoff():
    state = run(normals20(), 5000, PolicyConfig(warmup_fraction=0.1), RngStream(8))
    assert state.counts.sum() == 5000
    assert state.counts_post.sum() == 4500
    assert np.all(state.counts_post <= state.counts)


def test_point_masses_concentrate_on_better_arm():
    arms = [SystemSpec.empirical([1.0]), SystemSpec.empirical([0.0])]
    state = run(arms, 2000, PLAIN, RngStream(0))
    assert state.counts[0] / 2000 > 0.99


def test_determinism():
    a = run(normals20(), 5000, rng=RngStream(77))
    b = run(normals20(), 5000, rng=RngStream(77))
    assert np.array_equal(a.counts, b.counts) and np.array_equal(a.sums, b.sums)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31), st.integers(0, 2**31))
def test_select_arm_permutation_equivariant(K, seed, perm_seed):
    g = np.random.default_rng(seed)
    samples = [g.normal(g.normal(), 1.0, size=g.integers(1, 6)).tolist() for _ in range(K)]
    perm = np.random.default_rng(perm_seed).permutation(K)
    a = BanditState.from_samples(samples, config=PLAIN)
    b = BanditState.from_samples([samples[p] for p in perm], config=PLAIN)
    n = int(a.counts.sum()) + 1
    assert perm[select_arm(b, n)] == select_arm(a, n)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 500), st.floats(0.0, 0.9), st.booleans(), st.integers(0, 2**31))
def test_count_conservation(K, extra, frac, va, seed):
    arms = [SystemSpec.normal(float(k), 1.0) for k in range(K)]
    n = K + extra
    cfg = PolicyConfig(variance_aware=va, warmup_fraction=frac)
    state = run(arms, n, cfg, RngStream(seed))
    assert state.counts.sum() == n
    assert state.counts_post.sum() == n - cfg.warmup_cutoff(n)
    assert np.all(state.counts >= 1)


def test_static_design_counts():
    state = run_static([SystemSpec.normal(0, 1)], 100, RngStream(1))
    assert state.counts.tolist() == [100]
    arms = [SystemSpec.bernoulli(p) for p in (0.3, 0.3, 0.3, 0.5)]
    bound = 4 * math.sqrt(423 * 0.25 * 0.75)
    for r in range(20):
        c = run_static(arms, 423, RngStream(3, r)).counts
        assert np.all(np.abs(c - 105.75) <= bound)


def test_static_pob_quarter():
    arms = [SystemSpec.bernoulli(p) for p in (0.3, 0.3, 0.3, 0.5)]
    shares = [run_static(arms, 423, RngStream(4, r)).counts[3] / 423 for r in range(2000)]
    m, se = np.mean(shares), np.std(shares, ddof=1) / math.sqrt(2000)
    assert abs(m - 0.25) <= 4 * se


def test_best_arm_share_million():
    # the 10% round-robin warm-up caps the raw share at 0.905; the ratio
    # statement is about the UCB rounds, i.e. the post warm-up allocation
    state = run(normals20(), 10**6, rng=RngStream(10))
    assert state.counts_post[19] / state.counts_post.sum() > 0.95


def test_sampling_ratio_consistency():
    arms = normals20()
    shares = []
    for r in range(200):
        s = run(arms, 10**5, rng=RngStream(11, r))
        shares.append(s.counts_post[19] / s.counts_post.sum())
    assert np.mean(shares) > 0.9


@pytest.mark.xfail(strict=True, reason="arm 19 (gap 0.5, sd 11) is still far from its log-growth regime at 1e5")
def test_suboptimal_counts_grow_slowly():
    arms = normals20()
    small = np.mean([run(arms, 10**4, rng=RngStream(12, r)).counts_post for r in range(200)], axis=0)
    large = np.mean([run(arms, 10**5, rng=RngStream(13, r)).counts_post for r in range(200)], axis=0)
    seen = small[:19] > 0
    assert np.all(large[:19][seen] / small[:19][seen] <= 2.5)
