import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from subprime_sim.stats import (
    DomainError,
    InvGammaParams,
    NormalParams,
    RandomStream,
    es_factor,
    inv_gamma_mean,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    sample_inv_gamma,
    sample_normal,
)

mp.mp.dps = 40


def bisect_quantile(p, lo=-12.0, hi=12.0):
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    for _ in range(200):
        mid = (lo + hi) / 2
        if mp.ncdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return float(lo)


def test_cdf_examples():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(-1.6449) == pytest.approx(0.05, abs=1e-5)
    # quadrature of the density, computed with mpmath
    assert normal_cdf(3.0) == pytest.approx(0.99865010196836990547, abs=1e-14)


@pytest.mark.parametrize("x", [-37.0, -8.5, -3.3, -1.0, -1e-3, 0.4, 2.2, 6.0, 9.0])
def test_cdf_against_high_precision(x):
    assert abs(normal_cdf(x) - float(mp.ncdf(x))) <= 1e-12


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_cdf_monotone(a, b):
    lo, hi = sorted((a, b))
    assert normal_cdf(lo) <= normal_cdf(hi)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_inputs_rejected(bad):
    with pytest.raises(DomainError):
        normal_cdf(bad)
    with pytest.raises(DomainError):
        normal_pdf(bad)


def test_quantile_examples():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.05) == pytest.approx(-1.6449, abs=1e-4)
    assert normal_quantile(0.01) == pytest.approx(bisect_quantile(mp.mpf("0.01")), abs=1e-12)
    assert normal_quantile(0.01) == pytest.approx(-2.3263478740408411, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_quantile_domain(p):
    with pytest.raises(DomainError):
        normal_quantile(p)


def test_quantile_round_trip_grid():
    grid = np.concatenate([
        np.logspace(-6, np.log10(0.5), 2000),
        0.5 + np.linspace(0, 0.5 - 1e-6, 2000),
        1 - np.logspace(-6, -1, 500),
    ])
    worst = max(abs(normal_cdf(normal_quantile(p)) - p) for p in grid)
    assert worst <= 1e-10


@given(st.floats(1e-9, 1 - 1e-9), st.floats(1e-9, 1 - 1e-9))
def test_quantile_strictly_increasing(p, q):
    if p == q:
        return
    lo, hi = sorted((p, q))
    assert normal_quantile(lo) < normal_quantile(hi)


def test_pdf_examples():
    assert normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert normal_pdf(1.0) == pytest.approx(float(mp.exp(-mp.mpf(1) / 2) / mp.sqrt(2 * mp.pi)), rel=1e-14)
    assert normal_pdf(normal_quantile(0.05)) / 0.05 == pytest.approx(2.063, abs=1e-3)
    assert es_factor(0.05) == pytest.approx(2.0627128075074260, rel=1e-12)


@given(st.floats(-40, 40))
def test_pdf_symmetric_and_bounded(x):
    assert normal_pdf(x) == normal_pdf(-x)
    assert 0 <= normal_pdf(x) <= normal_pdf(0.0)


@pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
def test_tail_integral_identity(alpha):
    # integral_0^alpha Phi^-1(u) du by trapezoid in s = log u, against -phi(Phi^-1(alpha))
    s = np.linspace(np.log(1e-300), np.log(alpha), 200_001)
    u = np.exp(s)
    f = np.array([normal_quantile(x) for x in u]) * u
    integral = np.trapezoid(f, s)
    assert integral == pytest.approx(-normal_pdf(normal_quantile(alpha)), abs=1e-6)


def test_sample_normal_degenerate():
    rng = RandomStream(1, 0)
    assert sample_normal(NormalParams(2.0, 0.0), rng) == 2.0


def test_sample_normal_moments():
    rng = RandomStream(7, 0)
    xs = np.array([sample_normal(NormalParams(0.0, 1.0), rng) for _ in range(200_000)])
    n = 1_000_000
    big = RandomStream(7, 1).standard_normal(n)
    # 3 standard errors of the mean: 3 / sqrt(n)
    assert abs(big.mean()) <= 0.004
    assert abs(big.var() - 1.0) <= 3 * math.sqrt(2.0 / n)
    assert abs(xs.mean()) <= 3 / math.sqrt(len(xs))


def test_stream_determinism_and_independence():
    a = RandomStream(42, 3).standard_normal(1000)
    b = RandomStream(42, 3).standard_normal(1000)
    c = RandomStream(42, 4).standard_normal(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    # independent streams: correlation within ~4 standard errors of zero
    assert abs(np.corrcoef(a, c)[0, 1]) < 4 / math.sqrt(1000)


def test_stream_rejects_out_of_range_seed():
    with pytest.raises(DomainError):
        RandomStream(-1, 0)
    with pytest.raises(DomainError):
        RandomStream(0, 2**64)


def test_inv_gamma_mean():
    assert inv_gamma_mean(InvGammaParams(3, 4)) == 2
    assert inv_gamma_mean(InvGammaParams(1.5, 1)) == 2
    with pytest.raises(DomainError):
        inv_gamma_mean(InvGammaParams(1, 1))


def test_inv_gamma_sampling_mean():
    p = InvGammaParams(6.0, 10.0)
    draws = sample_inv_gamma(p, RandomStream(3, 0), 400_000)
    var = p.scale**2 / ((p.shape - 1) ** 2 * (p.shape - 2))
    assert abs(draws.mean() - inv_gamma_mean(p)) <= 4 * math.sqrt(var / len(draws))
