"""Conjugate Inverse-Gamma beliefs over a group's payoff variance (known mean)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from .stats import DomainError, InvGammaParams, inv_gamma_mean


@dataclass(frozen=True)
class CreditFileSpec:
    """Historical credit file: ``n`` applicants, fraction ``completeness`` complete."""

    n: float
    completeness: float
    sample_variance: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise DomainError(f"n must be >= 0, got {self.n}")
        if not (0.0 <= self.completeness <= 1.0):
            raise DomainError(f"completeness must lie in [0, 1], got {self.completeness}")
        if self.sample_variance < 0:
            raise DomainError(f"sample_variance must be >= 0, got {self.sample_variance}")

    @property
    def effective_size(self) -> float:
        return self.n * self.completeness


@dataclass(frozen=True)
class BeliefState:
    """Inverse-Gamma posterior stored as its sufficient statistics.

    ``shape`` and ``scale`` are always rebuilt from the base prior, the credit
    file contribution and the running totals, so sequential and batch updates
    produce the same numbers.
    """

    base_shape: float
    base_scale: float
    file_size: float  # n * p_i
    file_ss: float  # n * p_i * S_i^2
    m: int = 0
    ssd: float = 0.0

    @property
    def shape(self) -> float:
        return self.base_shape + (self.file_size + self.m) / 2.0

    @property
    def scale(self) -> float:
        return self.base_scale + (self.file_ss + self.ssd) / 2.0

    @property
    def params(self) -> InvGammaParams:
        return InvGammaParams(self.shape, self.scale)


def prior_from_credit_file(base: InvGammaParams, file: CreditFileSpec) -> BeliefState:
    if base.shape <= 1.0:
        raise DomainError(f"base prior shape must exceed 1, got {base.shape}")
    size = file.effective_size
    return BeliefState(base.shape, base.scale, size, size * file.sample_variance)


def update_with_return(belief: BeliefState, observed_return: float, known_mean: float) -> BeliefState:
    if not (math.isfinite(observed_return) and math.isfinite(known_mean)):
        raise DomainError("observed return and known mean must be finite")
    dev = observed_return - known_mean
    return replace(belief, m=belief.m + 1, ssd=belief.ssd + dev * dev)


def update_batch(belief: BeliefState, returns: Iterable[float], known_mean: float) -> BeliefState:
    """Posterior after a whole batch of returns, in one step."""
    devs = [r - known_mean for r in returns]
    if not all(math.isfinite(d) for d in devs):
        raise DomainError("observed returns must be finite")
    return replace(belief, m=belief.m + len(devs), ssd=belief.ssd + math.fsum(d * d for d in devs))


def posterior_variance_estimate(belief: BeliefState) -> float:
    """Posterior mean of the variance, b / (a - 1)."""
    return inv_gamma_mean(belief.params)
