import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxmean import (BanditState, DegenerateStatisticError, DomainError, EstimateReport, Experiment,
                     InsufficientDataError, PolicyConfig, RngStream, SystemSpec, bonferroni_fr_test,
                     replicate_trial, run, run_static, single_test, trial_metrics)
from maxmean.policy import ExplorationRate
from maxmean.testing import standardized


def report(point, var=1.0, n=100, estimator="LSA"):
    return EstimateReport(estimator, point, var, point, point, 0.1, n)


def test_point_at_mu0_never_rejects():
    out = single_test(report(0.3), 0.3, alpha=0.05)
    assert out.statistic == 0.0 and not out.reject


def test_two_se_above_rejects():
    out = single_test(report(0.3 + 2 * np.sqrt(1.0 / 100)), 0.3, alpha=0.05)
    assert out.statistic == pytest.approx(2.0)
    assert out.critical == pytest.approx(1.6449, abs=1e-4)
    assert out.reject and out.method == "SingleLSA"


def test_degenerate_variance_raises():
    with pytest.raises(DegenerateStatisticError):
        single_test(report(1.0, var=0.0), 0.0)


def test_alpha_domain():
    with pytest.raises(DomainError):
        single_test(report(1.0), 0.0, alpha=1.0)


@settings(max_examples=100, deadline=None)
@given(p=st.floats(-5, 5), bump=st.floats(0, 5), alpha=st.floats(0.001, 0.499))
def test_monotone_in_point(p, bump, alpha):
    lo, hi = single_test(report(p), 0.0, alpha), single_test(report(p + bump), 0.0, alpha)
    assert hi.reject or not lo.reject
    assert lo.reject == (lo.statistic > lo.critical)


def test_bonferroni_critical_value():
    s = BanditState.from_samples([[0.0, 1.0]] * 4)
    out = bonferroni_fr_test(s, 0.5, alpha=0.05, control_arm=0)
    assert out.critical == pytest.approx(2.1280, abs=1e-4)


def test_bonferroni_all_at_mu0():
    s = BanditState.from_samples([[0.0, 1.0, 0.0, 1.0]] * 4)
    out = bonferroni_fr_test(s, 0.5, alpha=0.05)
    assert out.statistic == 0.0 and not out.reject
    out = bonferroni_fr_test(s, 0.5, alpha=0.05, control_arm=0)
    assert out.statistic == 0.0 and not out.reject


def test_bonferroni_needs_samples():
    s = BanditState.from_samples([[0.0], [1.0, 0.0]])
    with pytest.raises(InsufficientDataError):
        bonferroni_fr_test(s, 0.5)


def test_standardized_zero_se():
    z = standardized([1.0, -1.0, 0.0, 2.0], [0.0, 0.0, 0.0, 1.0])
    assert list(z) == [np.inf, -np.inf, 0.0, 2.0]


def test_fwer_on_boundary_null():
    arms = [SystemSpec.bernoulli(0.3) for _ in range(4)]
    R = 10**4
    rejects = []
    for r in range(R):
        s = run_static(arms, 423, RngStream(20, r))
        try:
            rejects.append(bonferroni_fr_test(s, 0.3, alpha=0.05).reject)
        except InsufficientDataError:
            rejects.append(False)
    rate = np.mean(rejects)
    assert rate <= 0.05 + 2 * np.sqrt(rate * (1 - rate) / R)


def test_trial_metrics():
    s = run_static([SystemSpec.bernoulli(0.0)] * 4, 400, RngStream(21))
    pob, ens = trial_metrics(s, 3)
    assert ens == 0.0 and 0.0 <= pob <= 1.0


def test_fr_pob_quarter():
    exp = Experiment([SystemSpec.bernoulli(p) for p in (0.3, 0.3, 0.3, 0.5)], 423,
                     PolicyConfig(ExplorationRate.scaled_log(0.3)), lsa_scaling="count")
    fr = {row.method: row for row in replicate_trial(exp, 0.3, R=2000, base_seed=22)}["BonferroniFR"]
    assert abs(fr.mean_pob - 0.25) < 4 * fr.se_pob


def test_power_dominance_case2():
    exp = Experiment([SystemSpec.bernoulli(p) for p in (0.3, 0.3, 0.3, 0.5)], 423,
                     PolicyConfig(ExplorationRate.scaled_log(0.3)), lsa_scaling="count")
    rows = {row.method: row for row in replicate_trial(exp, 0.3, R=10**4, base_seed=23)}
    fr = rows["BonferroniFR"]
    for m in ("SingleGA", "SingleLSA"):
        diff = rows[m].reject_rate - fr.reject_rate
        assert diff > 4 * np.hypot(rows[m].se, fr.se)


def test_lsa_level_case1():
    exp = Experiment([SystemSpec.bernoulli(p) for p in (0.31, 0.27, 0.28, 0.29)], 423,
                     PolicyConfig(ExplorationRate.scaled_log(0.3)), lsa_scaling="count")
    rows = {row.method: row for row in replicate_trial(exp, 0.31, R=10**4, base_seed=24)}
    assert 0.03 <= rows["SingleLSA"].reject_rate <= 0.06
