"""Closed-form tail-risk evaluation for normal profits.

Everything here is expressed in profit space: a bank's constraint is that the
lower-tail level of its profit (the alpha-quantile for VaR, the mean of the
alpha-tail for ES) must stay at or above its loss floor ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

from .stats import DomainError, es_factor, normal_quantile


class Metric(str, Enum):
    VAR = "var"
    ES = "es"


class Aggregation(str, Enum):
    SUM_OF_STDS = "sum_of_stds"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class RiskPolicy:
    rho: float
    alpha: float
    metric: Metric = Metric.VAR
    aggregation: Aggregation = Aggregation.SUM_OF_STDS

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 0.5):
            raise DomainError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))

    @cached_property
    def z(self) -> float:
        return normal_quantile(self.alpha)

    @cached_property
    def tail_factor(self) -> float:
        """Multiplier k with tail level = mean - k * stdev (k > 0)."""
        if self.metric is Metric.ES:
            return es_factor(self.alpha)
        return -self.z

    @property
    def ordering_guaranteed(self) -> bool:
        return self.alpha < 0.1


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def var_normal(mean: float, stdev: float, alpha: float) -> float:
    """VaR (as a positive loss) of N(mean, stdev^2) profit at tail level alpha."""
    _check_alpha(alpha)
    return -(mean + stdev * normal_quantile(alpha))


def es_normal(mean: float, stdev: float, alpha: float) -> float:
    """Mean of the lower alpha-tail of N(mean, stdev^2) profit (a profit level)."""
    _check_alpha(alpha)
    return mean - stdev * es_factor(alpha)


def combine_stdev(policy: RiskPolicy, sigma_w: float, sigma_b: float) -> float:
    if policy.aggregation is Aggregation.INDEPENDENT:
        return math.hypot(sigma_w, sigma_b)
    return sigma_w + sigma_b


def shortfall(policy: RiskPolicy, mean: float, stdev: float) -> float:
    """Amount by which the profit tail level falls short of rho (negative = slack)."""
    return policy.rho - mean + policy.tail_factor * stdev


def var_gate(policy: RiskPolicy, mean: float, stdev: float, subsidy: float = 0.0) -> bool:
    """True iff the policy's tail constraint holds for profit N(mean, stdev^2) + subsidy.

    Written as ``subsidy >= shortfall`` so that paying exactly
    :func:`optimal_subsidy` passes without rounding slop.
    """
    if stdev < 0:
        raise DomainError(f"stdev must be >= 0, got {stdev}")
    return subsidy >= shortfall(policy, mean, stdev)


def optimal_subsidy(
    policy: RiskPolicy, mu_w: float, mu_b: float, sigma_w: float, sigma_b_hat: float
) -> float:
    """Smallest side payment that lets pooled lending pass the bank's gate."""
    stdev = combine_stdev(policy, sigma_w, sigma_b_hat)
    return max(0.0, shortfall(policy, mu_w + mu_b, stdev))


def threshold_unilateral(policy: RiskPolicy, mu: float, premium: float = 0.0) -> float:
    """Largest single-group variance a bank tolerates when lending to that group alone."""
    num = policy.rho - (1.0 + premium) * mu
    if num >= 0.0:
        return 0.0
    return (num / policy.z) ** 2


def threshold_pooled(
    policy: RiskPolicy, mu_w: float, mu_b: float, sigma_w: float, premium: float = 0.0
) -> float:
    """Largest believed B-variance at which lending to both groups passes VaR.

    Under ``sum_of_stds`` aggregation this is the closed form
    ``((rho - [(1+premium)(mu_w+mu_b) + z sigma_w]) / z)^2``, clamped to 0
    when no B-variance is acceptable.
    """
    z = policy.z
    mean = (1.0 + premium) * (mu_w + mu_b)
    if policy.aggregation is Aggregation.INDEPENDENT:
        cap = (policy.rho - mean) / z
        return max(0.0, cap * cap - sigma_w * sigma_w) if cap > 0 else 0.0
    r = (policy.rho - (mean + z * sigma_w)) / z
    return r * r if r > 0 else 0.0


def threshold_pooled_es(policy: RiskPolicy, mu_w: float, mu_b: float, sigma_w: float) -> float:
    """ES analogue of the pooled bound, in its textbook closed form.

    ``max{0, ((mu_w + mu_b - rho) / k)^2 - sigma_w^2}`` with
    ``k = phi(z_alpha)/alpha``.  The form combines the two groups' variances
    additively; :func:`pooled_bound` gives the bound the ES gate actually uses.
    """
    d = mu_w + mu_b - policy.rho
    if d <= 0:
        return 0.0
    return max(0.0, (d / es_factor(policy.alpha)) ** 2 - sigma_w * sigma_w)


def pooled_bound(
    policy: RiskPolicy, mu_w: float, mu_b: float, sigma_w: float, premium: float = 0.0
) -> float:
    """Largest believed B-variance that passes :func:`var_gate` for pooled lending.

    Honors the policy's metric and aggregation.  Returns 0 when even a
    zero B-variance fails.
    """
    cap = ((1.0 + premium) * (mu_w + mu_b) - policy.rho) / policy.tail_factor
    if cap <= 0:
        return 0.0
    if policy.aggregation is Aggregation.INDEPENDENT:
        return max(0.0, cap * cap - sigma_w * sigma_w)
    r = cap - sigma_w
    return r * r if r > 0 else 0.0


@dataclass(frozen=True)
class ThresholdSet:
    sigma2_L_uni: float
    sigma2_H_uni: float
    sigma2_L_pool: float
    sigma2_H_pool: float
    sigma2_L_pool_es: float

    def ordered(self) -> bool:
        """Strict chain L_uni < L_pool < H_uni < H_pool, all positive."""
        return 0.0 < self.sigma2_L_uni < self.sigma2_L_pool < self.sigma2_H_uni < self.sigma2_H_pool

    def es_conservative(self) -> bool:
        return self.sigma2_L_pool_es < self.sigma2_L_pool


def compute_thresholds(
    policy_l: RiskPolicy,
    policy_h: RiskPolicy,
    mu_w: float,
    mu_b: float,
    sigma_w: float,
    premium: float,
) -> ThresholdSet:
    """All five reported bounds.  Bank H uses its own ``rho`` and the premium."""
    return ThresholdSet(
        sigma2_L_uni=threshold_unilateral(policy_l, mu_b),
        sigma2_H_uni=threshold_unilateral(policy_h, mu_b, premium),
        sigma2_L_pool=threshold_pooled(policy_l, mu_w, mu_b, sigma_w),
        sigma2_H_pool=threshold_pooled(policy_h, mu_w, mu_b, sigma_w, premium),
        sigma2_L_pool_es=threshold_pooled_es(policy_l, mu_w, mu_b, sigma_w),
    )
