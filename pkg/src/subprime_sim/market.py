"""The per-period stage game: approvals, applicant choice, payoffs, learning.

Groups are indexed ``"W"`` (majority) and ``"B"`` (minority); banks ``"L"``
(mainstream, rate 1) and ``"H"`` (subprime, rate 1 + premium).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

from .beliefs import BeliefState, CreditFileSpec, posterior_variance_estimate, update_with_return
from .risk import RiskPolicy, combine_stdev, var_gate
from .stats import DomainError, RandomStream

GROUPS = ("W", "B")
BANKS = ("L", "H")


@dataclass(frozen=True)
class GroupProfile:
    label: str
    mean: float
    variance: float
    credit_file: CreditFileSpec

    def __post_init__(self) -> None:
        if self.label not in GROUPS:
            raise DomainError(f"group label must be one of {GROUPS}, got {self.label!r}")
        if not (self.variance >= 0):
            raise DomainError(f"group {self.label}: variance must be >= 0")

    @property
    def stdev(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class PricingState:
    premium: float
    nu_max: float

    def __post_init__(self) -> None:
        if self.nu_max < 0:
            raise DomainError(f"nu_max must be >= 0, got {self.nu_max}")
        if not (0.0 <= self.premium <= self.nu_max):
            raise DomainError(f"premium {self.premium} outside [0, {self.nu_max}]")


# approvals[bank] = (approves W, approves B)
Approvals = Dict[str, Tuple[bool, bool]]


@dataclass(frozen=True)
class PeriodOutcome:
    t: int
    approvals: Approvals
    acceptances: Dict[str, Tuple[Optional[str], ...]]  # per group, one entry per applicant
    payoffs: Dict[str, Tuple[float, ...]]
    premium: float
    profit_L: float
    profit_H: float
    subsidy: float
    # start-of-period posterior variance estimates, keyed "BL", "BH", "WL", "WH"
    estimates: Dict[str, float] = field(default_factory=dict)
    l_gate_unsubsidized: bool = False

    def accepted(self, group: str, bank: str) -> bool:
        return bank in self.acceptances[group]

    def approved(self, group: str, bank: str) -> bool:
        return self.approvals[bank][GROUPS.index(group)]


def h_payoff(pi: float, premium: float) -> float:
    """Bank H's take: gains scaled by (1 + premium), losses passed through."""
    if premium < 0:
        raise DomainError(f"premium must be >= 0, got {premium}")
    return (1.0 + premium) * max(pi, 0.0) + min(pi, 0.0)


def bank_approvals(
    policy: RiskPolicy,
    mu_w: float,
    mu_b: float,
    sigma_w: float,
    sigma_b_hat: float,
    premium: float = 0.0,
    subsidy: float = 0.0,
) -> Tuple[bool, bool]:
    """One bank's approval pair (W, B).

    Tries pooled lending first, then W alone, then B alone.  With positive
    equal means the first configuration whose gate passes is the most
    profitable one.
    """
    scale = 1.0 + premium
    pooled_sd = combine_stdev(policy, sigma_w, sigma_b_hat)
    if var_gate(policy, scale * (mu_w + mu_b), pooled_sd, subsidy):
        return True, True
    if var_gate(policy, scale * mu_w, sigma_w, subsidy):
        return True, False
    if var_gate(policy, scale * mu_b, sigma_b_hat, subsidy):
        return False, True
    return False, False


def bank_decisions(
    beliefs_l: Dict[str, BeliefState],
    beliefs_h: Dict[str, BeliefState],
    policies: Dict[str, RiskPolicy],
    groups: Dict[str, GroupProfile],
    pricing: PricingState,
    subsidy_offer: float = 0.0,
) -> Approvals:
    """Approvals for both banks at a given premium.

    The W variance is common knowledge, so gates use the true ``sigma_W``;
    each bank plugs in its own posterior estimate for B.  Only Bank L
    receives the subsidy offer.
    """
    w, b = groups["W"], groups["B"]
    out = {}
    for bank, beliefs in (("L", beliefs_l), ("H", beliefs_h)):
        sd_b = math.sqrt(posterior_variance_estimate(beliefs["B"]))
        out[bank] = bank_approvals(
            policies[bank],
            w.mean,
            b.mean,
            w.stdev,
            sd_b,
            premium=pricing.premium if bank == "H" else 0.0,
            subsidy=subsidy_offer if bank == "L" else 0.0,
        )
    return out


def h_pricing_rule(l_approves_b: bool, pricing: PricingState) -> float:
    """Monopoly premium while L shuts B out; Bertrand zero once L competes for B."""
    return 0.0 if l_approves_b else pricing.nu_max


def choose_bank(approve_l: bool, approve_h: bool, premium: float, coin: float) -> Optional[str]:
    if approve_l and approve_h:
        if premium > 0.0:
            return "L"
        return "L" if coin < 0.5 else "H"
    if approve_l:
        return "L"
    if approve_h:
        return "H"
    return None


def applicant_choice(
    approvals: Approvals, pricing: PricingState, rng: RandomStream, cohort_size: int = 1
) -> Dict[str, Tuple[Optional[str], ...]]:
    """Each applicant takes the cheapest approving bank, flipping a coin on a tie.

    Coins are drawn for every applicant whether or not they are needed, so
    the stream advances identically under every decision pattern.
    """
    coins = rng.uniform(len(GROUPS) * cohort_size)
    out = {}
    for gi, g in enumerate(GROUPS):
        row = coins[gi * cohort_size:(gi + 1) * cohort_size]
        out[g] = tuple(
            choose_bank(approvals["L"][gi], approvals["H"][gi], pricing.premium, float(c))
            for c in row
        )
    return out


@dataclass(frozen=True)
class MarketState:
    groups: Dict[str, GroupProfile]
    policies: Dict[str, RiskPolicy]
    nu_max: float
    beliefs: Dict[Tuple[str, str], BeliefState]  # keyed (bank, group)
    cohort_size: int = 1

    def bank_beliefs(self, bank: str) -> Dict[str, BeliefState]:
        return {g: self.beliefs[(bank, g)] for g in GROUPS}

    def estimate(self, bank: str, group: str) -> float:
        return posterior_variance_estimate(self.beliefs[(bank, group)])


def run_period(
    state: MarketState, rng: RandomStream, t: int = 1, subsidy: float = 0.0
) -> Tuple[PeriodOutcome, MarketState]:
    """Play one period and return its outcome with the updated state.

    Sequence: L decides (its gate does not depend on the premium), H prices
    off L's decision on B, H decides, applicants choose, payoffs are drawn,
    profits are booked and each bank learns only from loans it actually made.
    """
    groups, policies = state.groups, state.policies
    w, b = groups["W"], groups["B"]
    estimates = {g + bank: state.estimate(bank, g) for g in GROUPS for bank in BANKS}

    sd_bl = math.sqrt(estimates["BL"])
    pooled_sd = combine_stdev(policies["L"], w.stdev, sd_bl)
    gate0 = var_gate(policies["L"], w.mean + b.mean, pooled_sd, 0.0)

    approvals_l = bank_approvals(policies["L"], w.mean, b.mean, w.stdev, sd_bl, subsidy=subsidy)
    pricing = PricingState(h_pricing_rule(approvals_l[1], PricingState(0.0, state.nu_max)), state.nu_max)
    approvals_h = bank_approvals(
        policies["H"], w.mean, b.mean, w.stdev, math.sqrt(estimates["BH"]), premium=pricing.premium
    )
    approvals = {"L": approvals_l, "H": approvals_h}

    n = state.cohort_size
    shocks = rng.standard_normal(len(GROUPS) * n)
    acceptances = applicant_choice(approvals, pricing, rng, n)

    payoffs = {}
    for gi, g in enumerate(GROUPS):
        grp = groups[g]
        z = shocks[gi * n:(gi + 1) * n]
        if grp.variance == 0.0:
            payoffs[g] = tuple(float(grp.mean) for _ in z)
        else:
            payoffs[g] = tuple(grp.mean + grp.stdev * float(x) for x in z)

    profit_l = 0.0
    profit_h = 0.0
    beliefs = dict(state.beliefs)
    for g in GROUPS:
        mu = groups[g].mean
        for bank, pi in zip(acceptances[g], payoffs[g]):
            if bank is None:
                continue
            if bank == "L":
                profit_l += pi
            else:
                profit_h += h_payoff(pi, pricing.premium)
            beliefs[(bank, g)] = update_with_return(beliefs[(bank, g)], pi, mu)

    paid = subsidy if (subsidy > 0.0 and approvals_l[1]) else 0.0
    outcome = PeriodOutcome(
        t=t,
        approvals=approvals,
        acceptances=acceptances,
        payoffs=payoffs,
        premium=pricing.premium,
        profit_L=profit_l,
        profit_H=profit_h,
        subsidy=paid,
        estimates=estimates,
        l_gate_unsubsidized=gate0,
    )
    return outcome, replace(state, beliefs=beliefs)
