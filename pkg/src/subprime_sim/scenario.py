"""Scenario configuration: JSON ingestion, validation and assumption checks.

A scenario is one JSON document with top-level keys ``groups``, ``banks``,
``pricing``, ``simulation`` and ``subsidy``.  See ``examples/trap.json``
for an annotated example.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from .beliefs import CreditFileSpec, posterior_variance_estimate, prior_from_credit_file
from .market import GroupProfile
from .risk import Aggregation, Metric, RiskPolicy, compute_thresholds, pooled_bound, threshold_unilateral, ThresholdSet
from .stats import DomainError, InvGammaParams


class ScenarioError(ValueError):
    """Scenario is malformed or violates a required assumption."""


class SubsidyMode(str, Enum):
    NONE = "none"
    ADAPTIVE_VAR = "adaptive_var"
    ADAPTIVE_ES = "adaptive_es"
    CUSTOM_GUARANTEE = "custom_guarantee"


@dataclass(frozen=True)
class GuaranteeSpec:
    """Guarantee schedule ``G(t) = multiplier * s*_t + offset`` during the learning phase."""

    multiplier: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    groups: Dict[str, GroupProfile]
    policies: Dict[str, RiskPolicy]
    nu_max: float
    horizon: int
    prior: InvGammaParams
    prior_H: Optional[InvGammaParams] = None
    subsidy_mode: SubsidyMode = SubsidyMode.NONE
    guarantee: GuaranteeSpec = field(default_factory=GuaranteeSpec)
    replications: int = 1
    seed: int = 0
    cohort_size: int = 1
    allow_unequal_means: bool = False

    def __post_init__(self) -> None:
        if set(self.groups) != {"W", "B"}:
            raise ScenarioError("groups must be exactly W and B")
        if set(self.policies) != {"L", "H"}:
            raise ScenarioError("banks must be exactly L and H")
        if self.horizon < 0:
            raise ScenarioError("simulation.horizon must be >= 0")
        if self.replications < 1:
            raise ScenarioError("simulation.replications must be >= 1")
        if self.cohort_size < 1:
            raise ScenarioError("simulation.cohort_size must be >= 1")
        if self.nu_max < 0:
            raise ScenarioError("pricing.nu_max must be >= 0")
        if not (0 <= self.seed < 2**64):
            raise ScenarioError("simulation.seed must be an unsigned 64-bit integer")
        w, b = self.groups["W"], self.groups["B"]
        if not self.allow_unequal_means and w.mean != b.mean:
            raise ScenarioError(
                f"group means differ (W={w.mean}, B={b.mean}); set allow_unequal_means for counterfactuals"
            )
        if w.mean <= 0 or b.mean <= 0:
            raise ScenarioError("group means must be positive")
        for bank in ("L", "H"):
            prior = self.bank_prior(bank)
            if prior.shape <= 1.0:
                raise ScenarioError(f"prior shape for bank {bank} must exceed 1")

    def bank_prior(self, bank: str) -> InvGammaParams:
        if bank == "H" and self.prior_H is not None:
            return self.prior_H
        return self.prior

    def lending_policy_l(self) -> RiskPolicy:
        """Bank L's policy, with the metric pinned by the subsidy mode."""
        pol = self.policies["L"]
        if self.subsidy_mode is SubsidyMode.ADAPTIVE_VAR:
            return replace(pol, metric=Metric.VAR)
        if self.subsidy_mode is SubsidyMode.ADAPTIVE_ES:
            return replace(pol, metric=Metric.ES)
        return pol

    def with_mode(self, mode: SubsidyMode | str) -> "ScenarioConfig":
        return replace(self, subsidy_mode=SubsidyMode(mode))

    def with_aggregation(self, aggregation: Aggregation | str) -> "ScenarioConfig":
        agg = Aggregation(aggregation)
        return replace(self, policies={k: replace(p, aggregation=agg) for k, p in self.policies.items()})

    def initial_estimate(self, bank: str, group: str) -> float:
        belief = prior_from_credit_file(self.bank_prior(bank), self.groups[group].credit_file)
        return posterior_variance_estimate(belief)

    def thresholds(self) -> ThresholdSet:
        w, b = self.groups["W"], self.groups["B"]
        return compute_thresholds(
            self.lending_policy_l(), self.policies["H"], w.mean, b.mean, w.stdev, self.nu_max
        )

    def l_pooled_bound(self) -> float:
        """Believed B-variance below which L lends to both groups unsubsidized."""
        w, b = self.groups["W"], self.groups["B"]
        return pooled_bound(self.lending_policy_l(), w.mean, b.mean, w.stdev)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str


def check_assumptions(config: ScenarioConfig) -> List[AssumptionCheck]:
    """Numerical checks of the trap-scenario assumptions 1-5.

    Assumption 3 is checked against both L's unilateral bound and the pooled
    bound L's gate uses, since escape requires the true B-variance to sit
    below the latter.
    """
    w, b = config.groups["W"], config.groups["B"]
    pol_l, pol_h = config.lending_policy_l(), config.policies["H"]
    uni_l = threshold_unilateral(pol_l, b.mean)
    pool_l = config.l_pooled_bound()
    uni_h = threshold_unilateral(pol_h, b.mean, config.nu_max)
    est_bl = config.initial_estimate("L", "B")
    est_bh = config.initial_estimate("H", "B")
    p_w, p_b = w.credit_file.completeness, b.credit_file.completeness
    return [
        AssumptionCheck(
            "assumption 1 (equal expected creditworthiness)",
            w.mean == b.mean and w.mean > 0,
            f"mu_W={w.mean!r}, mu_B={b.mean!r}",
        ),
        AssumptionCheck(
            "assumption 2 (differential information)",
            p_b < p_w,
            f"p_B={p_b!r}, p_W={p_w!r}",
        ),
        AssumptionCheck(
            "assumption 3 (both groups creditworthy)",
            w.variance <= b.variance < min(uni_l, pool_l),
            f"sigma2_W={w.variance!r} <= sigma2_B={b.variance!r} < "
            f"min(sigma2_L_uni={uni_l!r}, sigma2_L_pool={pool_l!r})",
        ),
        AssumptionCheck(
            "assumption 4 (L's prior for B above its threshold)",
            est_bl > pool_l,
            f"sigma2_hat_BL0={est_bl!r} > sigma2_L_pool={pool_l!r}",
        ),
        AssumptionCheck(
            "assumption 5 (H's prior for B below its threshold)",
            est_bh <= uni_h,
            f"sigma2_hat_BH0={est_bh!r} <= sigma2_H_uni={uni_h!r}",
        ),
    ]


def validate_trap(config: ScenarioConfig) -> None:
    failed = [c for c in check_assumptions(config) if not c.passed]
    if failed:
        raise ScenarioError("; ".join(f"{c.name} violated: {c.detail}" for c in failed))


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------


def _get(d: Dict[str, Any], key: str, ctx: str, default: Any = ...) -> Any:
    if not isinstance(d, dict):
        raise ScenarioError(f"{ctx}: expected an object")
    if key not in d:
        if default is ...:
            raise ScenarioError(f"{ctx}.{key}: missing required key")
        return default
    return d[key]


def _num(d: Dict[str, Any], key: str, ctx: str, default: Any = ...) -> float:
    v = _get(d, key, ctx, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{ctx}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(d: Dict[str, Any], key: str, ctx: str, default: Any = ...) -> int:
    v = _get(d, key, ctx, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{ctx}.{key}: expected an integer, got {v!r}")
    return v


def _prior(d: Dict[str, Any], ctx: str) -> InvGammaParams:
    return InvGammaParams(_num(d, "shape", ctx), _num(d, "scale", ctx))


def config_from_dict(doc: Dict[str, Any]) -> ScenarioConfig:
    try:
        groups_doc = _get(doc, "groups", "scenario")
        groups = {}
        for label in ("W", "B"):
            ctx = f"groups.{label}"
            g = _get(groups_doc, label, "groups")
            cf = _get(g, "credit_file", ctx)
            groups[label] = GroupProfile(
                label=label,
                mean=_num(g, "mean", ctx),
                variance=_num(g, "variance", ctx),
                credit_file=CreditFileSpec(
                    n=_num(cf, "n", ctx + ".credit_file"),
                    completeness=_num(cf, "completeness", ctx + ".credit_file"),
                    sample_variance=_num(cf, "sample_variance", ctx + ".credit_file", 1.0),
                ),
            )
        banks_doc = _get(doc, "banks", "scenario")
        policies = {}
        for bank in ("L", "H"):
            ctx = f"banks.{bank}"
            bd = _get(banks_doc, bank, "banks")
            try:
                policies[bank] = RiskPolicy(
                    rho=_num(bd, "rho", ctx),
                    alpha=_num(bd, "alpha", ctx),
                    metric=_get(bd, "metric", ctx, "var"),
                    aggregation=_get(bd, "aggregation", ctx, "sum_of_stds"),
                )
            except ValueError as exc:
                raise ScenarioError(f"{ctx}: {exc}") from None
        pricing = _get(doc, "pricing", "scenario")
        sim = _get(doc, "simulation", "scenario")
        prior = _prior(_get(sim, "prior", "simulation"), "simulation.prior")
        prior_h_doc = _get(sim, "prior_H", "simulation", None)
        sub = _get(doc, "subsidy", "scenario", {})
        g_doc = _get(sub, "guarantee", "subsidy", {})
        try:
            mode = SubsidyMode(_get(sub, "mode", "subsidy", "none"))
        except ValueError:
            raise ScenarioError(f"subsidy.mode: unknown mode {sub.get('mode')!r}") from None
        return ScenarioConfig(
            groups=groups,
            policies=policies,
            nu_max=_num(pricing, "nu_max", "pricing"),
            horizon=_int(sim, "horizon", "simulation"),
            prior=prior,
            prior_H=_prior(prior_h_doc, "simulation.prior_H") if prior_h_doc is not None else None,
            subsidy_mode=mode,
            guarantee=GuaranteeSpec(
                multiplier=_num(g_doc, "multiplier", "subsidy.guarantee", 1.0),
                offset=_num(g_doc, "offset", "subsidy.guarantee", 0.0),
            ),
            replications=_int(sim, "replications", "simulation", 1),
            seed=_int(sim, "seed", "simulation", 0),
            cohort_size=_int(sim, "cohort_size", "simulation", 1),
            allow_unequal_means=bool(_get(doc, "allow_unequal_means", "scenario", False)),
        )
    except DomainError as exc:
        raise ScenarioError(str(exc)) from None


def read_scenario_doc(path: str | Path) -> Dict[str, Any]:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be a JSON object")
    # keys starting with "_" are annotations
    return _strip_comments(doc)


def _strip_comments(node: Any) -> Any:
    if isinstance(node, dict):
        return {k: _strip_comments(v) for k, v in node.items() if not k.startswith("_")}
    if isinstance(node, list):
        return [_strip_comments(v) for v in node]
    return node


def load_scenario(path: str | Path) -> ScenarioConfig:
    return config_from_dict(read_scenario_doc(path))


def set_path(doc: Dict[str, Any], dotted: str, value: Any) -> Dict[str, Any]:
    """Copy of ``doc`` with the dotted key path set to ``value``."""
    out = copy.deepcopy(doc)
    node = out
    parts = dotted.split(".")
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ScenarioError(f"sweep parameter {dotted!r}: no object at {p!r}")
        node = node[p]
    node[parts[-1]] = value
    return out


def config_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """Resolved configuration in scenario-file layout (for manifests)."""

    def prior(p: InvGammaParams) -> Dict[str, float]:
        return {"shape": p.shape, "scale": p.scale}

    doc = {
        "groups": {
            g: {
                "mean": p.mean,
                "variance": p.variance,
                "credit_file": {
                    "n": p.credit_file.n,
                    "completeness": p.credit_file.completeness,
                    "sample_variance": p.credit_file.sample_variance,
                },
            }
            for g, p in config.groups.items()
        },
        "banks": {
            b: {"rho": p.rho, "alpha": p.alpha, "metric": p.metric.value, "aggregation": p.aggregation.value}
            for b, p in config.policies.items()
        },
        "pricing": {"nu_max": config.nu_max},
        "simulation": {
            "horizon": config.horizon,
            "replications": config.replications,
            "seed": config.seed,
            "cohort_size": config.cohort_size,
            "prior": prior(config.prior),
        },
        "subsidy": {
            "mode": config.subsidy_mode.value,
            "guarantee": {"multiplier": config.guarantee.multiplier, "offset": config.guarantee.offset},
        },
        "allow_unequal_means": config.allow_unequal_means,
    }
    if config.prior_H is not None:
        doc["simulation"]["prior_H"] = prior(config.prior_H)
    return doc
