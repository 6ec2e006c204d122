import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from subprime_sim.risk import (
    Aggregation,
    Metric,
    RiskPolicy,
    combine_stdev,
    compute_thresholds,
    es_normal,
    optimal_subsidy,
    pooled_bound,
    threshold_pooled,
    threshold_pooled_es,
    threshold_unilateral,
    var_gate,
    var_normal,
)
from subprime_sim.stats import DomainError, es_factor, normal_cdf, normal_pdf, normal_quantile

# frozen from an mpmath oracle (50 digits), see test_stats
Z05 = -1.6448536269514727
K05 = 2.0627128075074260

L = RiskPolicy(-2.0, 0.05)
L_ES = RiskPolicy(-2.0, 0.05, Metric.ES)


def test_var_known_value():
    assert var_normal(2.0, 3.0, 0.05) == pytest.approx(2.9345608808544181, abs=1e-12)


def test_var_of_standard_normal():
    assert var_normal(0.0, 1.0, 0.05) == pytest.approx(1.6449, abs=1e-4)


def test_es_of_standard_normal():
    assert es_normal(0.0, 1.0, 0.05) == pytest.approx(-K05, abs=1e-12)


def test_es_below_quantile():
    assert es_normal(0.0, 1.0, 0.05) < -var_normal(0.0, 1.0, 0.05)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
def test_alpha_domain(alpha):
    with pytest.raises(DomainError):
        var_normal(0.0, 1.0, alpha)


@pytest.mark.parametrize("alpha", [0.5, 0.0, 0.7])
def test_policy_alpha_domain(alpha):
    with pytest.raises(DomainError):
        RiskPolicy(-1.0, alpha)


@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1, 0.25])
def test_es_quadrature(alpha):
    """Tail mean via trapezoid integration of the quantile over (0, alpha]."""
    z = normal_quantile(alpha)
    # substitute x = quantile(u): integral of x phi(x) over (-inf, z] divided by alpha
    x = np.linspace(-40.0, z, 400_001)
    f = x * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    tail = np.trapezoid(f, x) if hasattr(np, "trapezoid") else np.trapz(f, x)
    assert es_normal(0.0, 1.0, alpha) == pytest.approx(tail / alpha, abs=1e-6)


@pytest.mark.parametrize("mean,stdev,alpha", [(0.0, 1.0, 0.05), (1.0, 2.0, 0.01), (-3.0, 0.5, 0.2)])
def test_var_matches_empirical_quantile(mean, stdev, alpha):
    n = 200_000
    draws = np.random.default_rng(7).normal(mean, stdev, n)
    q = np.quantile(draws, alpha)
    z = normal_quantile(alpha)
    se = math.sqrt(alpha * (1 - alpha) / n) / (normal_pdf(z) / stdev)
    assert abs(-q - var_normal(mean, stdev, alpha)) < 3 * se


def test_combine_stdev():
    assert combine_stdev(L, 0.5, 1.2) == 1.7
    ind = RiskPolicy(-2.0, 0.05, aggregation=Aggregation.INDEPENDENT)
    assert combine_stdev(ind, 3.0, 4.0) == 5.0


def test_gate_examples():
    assert var_gate(L, 2.0, 0.0)
    assert not var_gate(RiskPolicy(3.0, 0.05), 2.0, 0.0)
    with pytest.raises(DomainError):
        var_gate(L, 0.0, -1.0)


def test_optimal_subsidy_examples():
    assert optimal_subsidy(L, 1.0, 1.0, 0.5, 2.5) == pytest.approx(0.93456088085441814, abs=1e-12)
    assert optimal_subsidy(L_ES, 1.0, 1.0, 0.5, 2.5) == pytest.approx(2.1881384225222781, abs=1e-12)
    assert optimal_subsidy(L, 1.0, 1.0, 0.5, 0.1) == 0.0


@settings(max_examples=300)
@given(
    st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 2), st.floats(0, 5),
    st.floats(0.001, 0.3), st.sampled_from(list(Metric)), st.sampled_from(list(Aggregation)),
)
def test_exact_subsidy_is_the_boundary(rho, mu, sw, sb, alpha, metric, agg):
    pol = RiskPolicy(rho, alpha, metric, agg)
    s = optimal_subsidy(pol, mu, mu, sw, sb)
    sd = combine_stdev(pol, sw, sb)
    assert var_gate(pol, 2 * mu, sd, s)
    if s > 0:
        assert not var_gate(pol, 2 * mu, sd, s - 1e-6)


@settings(max_examples=300)
@given(st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 2), st.floats(0, 5), st.floats(0.001, 0.49))
def test_es_subsidy_dominates(rho, mu, sw, sb, alpha):
    v = optimal_subsidy(RiskPolicy(rho, alpha), mu, mu, sw, sb)
    e = optimal_subsidy(RiskPolicy(rho, alpha, Metric.ES), mu, mu, sw, sb)
    assert e >= v
    if e > 0 and sw + sb > 0:
        assert e > v


@given(st.floats(0, 3), st.floats(0, 3))
def test_subsidy_monotone_in_belief(a, b):
    lo, hi = sorted((a, b))
    assert optimal_subsidy(L, 1.0, 1.0, 0.5, lo) <= optimal_subsidy(L, 1.0, 1.0, 0.5, hi)


def test_threshold_examples():
    assert threshold_unilateral(L, 1.0) == pytest.approx(3.3265035852137539, abs=1e-12)
    assert threshold_unilateral(L, 1.0, 0.2) == pytest.approx(3.7848218569543160, abs=1e-12)
    assert threshold_pooled(L, 1.0, 1.0, 0.5) == pytest.approx(3.7319568238440423, abs=1e-12)
    assert threshold_pooled_es(L, 1.0, 1.0, 0.5) == pytest.approx(3.5104728054869239, abs=1e-12)
    # coarse three-decimal check
    assert threshold_pooled_es(L, 1.0, 1.0, 0.5) == pytest.approx(3.5110, abs=1e-3)


def test_threshold_clamps_when_floor_above_mean():
    assert threshold_unilateral(RiskPolicy(1.5, 0.05), 1.0) == 0.0
    assert threshold_pooled(RiskPolicy(3.0, 0.05), 1.0, 1.0, 0.5) == 0.0
    assert threshold_pooled_es(RiskPolicy(3.0, 0.05), 1.0, 1.0, 0.5) == 0.0


def test_closed_es_form_is_the_independent_bound():
    ind = RiskPolicy(-2.0, 0.05, Metric.ES, Aggregation.INDEPENDENT)
    assert threshold_pooled_es(L_ES, 1.0, 1.0, 0.5) == pytest.approx(pooled_bound(ind, 1.0, 1.0, 0.5), rel=1e-14)


@settings(max_examples=300)
@given(
    st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 2), st.floats(0, 0.5),
    st.floats(0.001, 0.3), st.sampled_from(list(Metric)), st.sampled_from(list(Aggregation)),
)
def test_pooled_bound_agrees_with_gate(rho, mu, sw, nu, alpha, metric, agg):
    pol = RiskPolicy(rho, alpha, metric, agg)
    bound = pooled_bound(pol, mu, mu, sw, nu)
    assume(bound > 1e-6)
    mean = (1 + nu) * 2 * mu
    assert var_gate(pol, mean, combine_stdev(pol, sw, math.sqrt(bound * (1 - 1e-9))))
    assert not var_gate(pol, mean, combine_stdev(pol, sw, math.sqrt(bound * (1 + 1e-6))))


@given(st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 2), st.floats(0.001, 0.3))
def test_var_pooled_bound_matches_closed_form(rho, mu, sw, alpha):
    pol = RiskPolicy(rho, alpha)
    assert pooled_bound(pol, mu, mu, sw) == pytest.approx(threshold_pooled(pol, mu, mu, sw), rel=1e-12, abs=1e-12)


@given(st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 2), st.floats(0.001, 0.49))
def test_gate_consistent_es_bound_is_conservative(rho, mu, sw, alpha):
    var_b = pooled_bound(RiskPolicy(rho, alpha), mu, mu, sw)
    es_b = pooled_bound(RiskPolicy(rho, alpha, Metric.ES), mu, mu, sw)
    assert es_b <= var_b
    if var_b > 0:
        assert es_b < var_b


@given(st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 1), st.floats(0.001, 0.49))
def test_unilateral_grows_with_premium(rho, mu, nu, alpha):
    pol = RiskPolicy(rho, alpha)
    assert threshold_unilateral(pol, mu, nu) >= threshold_unilateral(pol, mu)


# The strict four-way chain is not universal: the pieces below pin down the
# parameter region where each link holds, so that failures elsewhere are
# explained rather than hidden.

@given(st.floats(-10, -0.01), st.floats(0.01, 5), st.floats(0, 2), st.floats(0.001, 0.099))
def test_l_pooled_exceeds_unilateral_iff_mean_beats_w_tail(rho, mu, sw, alpha):
    pol = RiskPolicy(rho, alpha)
    gap = mu - abs(pol.z) * sw
    assume(abs(gap) > 1e-9)
    uni, pool = threshold_unilateral(pol, mu), threshold_pooled(pol, mu, mu, sw)
    assert (pool > uni) == (gap > 0)


def test_chain_counterexample():
    pl, ph = RiskPolicy(-2.0, 0.05), RiskPolicy(-2.0, 0.05)
    ts = compute_thresholds(pl, ph, 1.0, 1.0, 0.0, 0.2)
    assert ts.sigma2_L_pool > ts.sigma2_H_uni
    assert not ts.ordered()


def test_reference_ordering():
    ts = compute_thresholds(RiskPolicy(-2.0, 0.05), RiskPolicy(-4.0, 0.05), 1.0, 1.0, 0.5, 1.0)
    assert ts.ordered()
    assert ts.es_conservative()
