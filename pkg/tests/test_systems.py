import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxmean import ConfigError, RngStream, SystemSpec, sample, sample_many, stream_id, true_mean
from maxmean.systems import pack

from conftest import mean_and_se, within_se


def test_true_means():
    assert true_mean(SystemSpec.normal(2.0, 5.0)) == 2.0
    assert true_mean(SystemSpec.bernoulli(0.3)) == 0.3
    assert true_mean(SystemSpec.shifted_exponential(-0.001, 41.9)) == pytest.approx(41.899, abs=1e-12)
    assert true_mean(SystemSpec.empirical([1, 2, 3])) == 2.0
    assert true_mean(SystemSpec.shifted_erlang(1.0, 2.0, 3)) == 7.0
    assert true_mean(SystemSpec.shifted_weibull(0.5, 2.0, 1.0)) == pytest.approx(2.5)
    assert true_mean(SystemSpec.normal(2.0, 1.0).negated()) == -2.0


def test_empirical_values_sorted():
    assert SystemSpec.empirical([3, 1, 2]).params == (1.0, 2.0, 3.0)


@pytest.mark.parametrize("bad", [
    lambda: SystemSpec.normal(0.0, 0.0),
    lambda: SystemSpec.bernoulli(1.5),
    lambda: SystemSpec.shifted_weibull(0.0, -1.0, 2.0),
    lambda: SystemSpec.shifted_erlang(0.0, 1.0, 0.0),
    lambda: SystemSpec.empirical([]),
    lambda: SystemSpec("cauchy", (0.0,)),
    lambda: SystemSpec("normal", (1.0,)),
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ConfigError):
        bad()


def test_degenerate_samplers():
    rng = RngStream(1)
    assert np.all(sample_many(SystemSpec.bernoulli(0.0), rng, 1000) == 0.0)
    assert np.all(sample_many(SystemSpec.bernoulli(1.0), rng, 1000) == 1.0)
    assert np.all(sample_many(SystemSpec.empirical([3, 3, 3]), rng, 1000) == 3.0)


def test_reproducible_bit_exact():
    spec = SystemSpec.normal(11.5, 11.5)
    a = sample_many(spec, RngStream(42, 7), 1000)
    b = sample_many(spec, RngStream(42, 7), 1000)
    assert np.array_equal(a, b)
    c = RngStream(42, 7)
    one_by_one = [sample(spec, c) for _ in range(1000)]
    assert np.array_equal(a, one_by_one)


def test_substreams_differ():
    spec = SystemSpec.normal(0.0, 1.0)
    a = sample_many(spec, RngStream(1, 0), 10)
    b = sample_many(spec, RngStream(1, 0, 1), 10)
    assert not np.array_equal(a, b)


def test_stream_id_layout():
    assert stream_id(0, 5) == 5
    assert stream_id(3, 5) == (3 << 32) + 5
    assert len({stream_id(c, r) for c in range(5) for r in range(100)}) == 500


@pytest.mark.parametrize("spec, var", [
    (SystemSpec.normal(11.5, 11.5), 11.5 ** 2),
    (SystemSpec.bernoulli(0.31), 0.31 * 0.69),
    (SystemSpec.shifted_exponential(-0.001, 41.9), 41.9 ** 2),
    (SystemSpec.shifted_erlang(1.0, 2.0, 3.0), 3 * 2.0 ** 2),
    (SystemSpec.shifted_weibull(0.5, 2.0, 1.5),
     4.0 * (math.gamma(1 + 2 / 1.5) - math.gamma(1 + 1 / 1.5) ** 2)),
    (SystemSpec.empirical([1.0, 2.0, 7.0]), np.var([1.0, 2.0, 7.0])),
])
def test_moments_million_draws(spec, var):
    x = sample_many(spec, RngStream(2024, 1), 10**6)
    m, se = mean_and_se(x)
    assert within_se(m, true_mean(spec), se)
    assert x.var() == pytest.approx(var, rel=0.02)


def test_normal_stdev_matches():
    x = sample_many(SystemSpec.normal(11.5, 11.5), RngStream(3), 10**6)
    assert x.std() == pytest.approx(11.5, rel=0.005)


def test_streams_uncorrelated():
    spec = SystemSpec.normal(0.0, 1.0)
    a = sample_many(spec, RngStream(9, 0), 10**5)
    b = sample_many(spec, RngStream(9, 1), 10**5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(10**5)


def test_pack_layout():
    t = pack([SystemSpec.normal(1.0, 2.0), SystemSpec.empirical([5, 6]), SystemSpec.bernoulli(0.5).negated()])
    assert t.kinds.tolist() == [0, 6, 1]
    assert t.params[0, :2].tolist() == [1.0, 2.0]
    assert t.emp_values.tolist() == [5.0, 6.0]
    assert t.emp_offsets.tolist() == [0, 0, 2, 2]
    assert t.signs.tolist() == [1.0, 1.0, -1.0]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), st.integers(0, 2**32))
def test_empirical_draws_stay_in_support(values, seed):
    x = sample_many(SystemSpec.empirical(values), RngStream(seed), 50)
    assert set(x.tolist()) <= set(float(v) for v in values)
