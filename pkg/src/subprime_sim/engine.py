"""Multi-period runs: the trap baseline, adaptive subsidies, guarantee schedules
and Monte Carlo aggregation over independent replications."""

from __future__ import annotations

import logging
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .beliefs import prior_from_credit_file
from .market import BANKS, GROUPS, MarketState, PeriodOutcome, run_period
from .risk import combine_stdev, optimal_subsidy, var_gate
from .scenario import GuaranteeSpec, ScenarioConfig, SubsidyMode, validate_trap
from .stats import RandomStream

log = logging.getLogger(__name__)

THREADS_ENV = "SUBPRIME_SIM_THREADS"


class GuaranteeError(RuntimeError):
    """A guarantee schedule failed to satisfy Bank L's tail constraint."""

    def __init__(self, period: int, amount: float, required: float):
        super().__init__(
            f"period {period}: guarantee {amount!r} is below the required {required!r}; "
            "Bank L's constraint is not met"
        )
        self.period = period
        self.amount = amount
        self.required = required


@dataclass(frozen=True)
class GuaranteePolicy:
    """Guarantee schedule active while L's unsubsidized gate fails.

    ``schedule(t, required)`` returns the amount paid in period ``t`` given
    the minimal feasible subsidy ``required``.  Feasibility is checked
    against L's gate each active period.
    """

    schedule: Callable[[int, float], float]

    def amount(self, t: int, required: float) -> float:
        return float(self.schedule(t, required))

    @classmethod
    def from_spec(cls, spec: GuaranteeSpec) -> "GuaranteePolicy":
        return cls(_LinearSchedule(spec.multiplier, spec.offset))


@dataclass(frozen=True)
class _LinearSchedule:
    multiplier: float
    offset: float

    def __call__(self, t: int, required: float) -> float:
        if self.multiplier == 1.0 and self.offset == 0.0:
            return required
        return max(0.0, self.multiplier * required + self.offset)


def _exact_subsidy(t: int, required: float) -> float:
    return required


@dataclass
class TrajectoryRecord:
    outcomes: List[PeriodOutcome]
    belief_path_L: List[float]  # start-of-period estimate of B's variance held by L
    belief_path_H: List[float]
    tau: Optional[int]
    recross_count: int
    total_subsidy: float
    final_estimates: Dict[str, float] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.outcomes)

    @property
    def escaped(self) -> bool:
        return self.tau is not None

    @property
    def degenerate(self) -> bool:
        return not self.outcomes

    def b_premiums(self) -> Tuple[List[float], List[float]]:
        """Premium paid by B's applicants, split before / from tau."""
        before, after = [], []
        cut = self.tau if self.tau is not None else math.inf
        for o in self.outcomes:
            paid = [o.premium if bank == "H" else 0.0 for bank in o.acceptances["B"] if bank is not None]
            (after if o.t >= cut else before).extend(paid)
        return before, after

    def h_withdrawal_rate(self) -> float:
        if not self.outcomes:
            return 0.0
        return sum(1 for o in self.outcomes if not o.approvals["H"][1]) / len(self.outcomes)


def _escape_time(gate_path: Sequence[bool]) -> Tuple[Optional[int], int]:
    """First period from which L's unsubsidized gate passes through the horizon,
    and how many times it flipped from passing back to failing."""
    recross = sum(1 for prev, cur in zip(gate_path, gate_path[1:]) if prev and not cur)
    last_fail = None
    for i, ok in enumerate(gate_path):
        if not ok:
            last_fail = i
    if last_fail is None:
        return (1 if gate_path else None), recross
    if last_fail == len(gate_path) - 1:
        return None, recross
    return last_fail + 2, recross


def initial_state(config: ScenarioConfig) -> MarketState:
    beliefs = {
        (bank, g): prior_from_credit_file(config.bank_prior(bank), config.groups[g].credit_file)
        for bank in BANKS
        for g in GROUPS
    }
    return MarketState(
        groups=dict(config.groups),
        policies={"L": config.lending_policy_l(), "H": config.policies["H"]},
        nu_max=config.nu_max,
        beliefs=beliefs,
        cohort_size=config.cohort_size,
    )


def _simulate(
    config: ScenarioConfig,
    rng: RandomStream,
    guarantee: Optional[Callable[[int, float], float]],
    check_feasible: bool = False,
) -> TrajectoryRecord:
    state = initial_state(config)
    pol_l = state.policies["L"]
    w, b = config.groups["W"], config.groups["B"]
    outcomes: List[PeriodOutcome] = []
    path_l: List[float] = []
    path_h: List[float] = []
    total = 0.0
    for t in range(1, config.horizon + 1):
        est_bl = state.estimate("L", "B")
        offer = 0.0
        if guarantee is not None:
            sd = combine_stdev(pol_l, w.stdev, math.sqrt(est_bl))
            if not var_gate(pol_l, w.mean + b.mean, sd, 0.0):
                required = optimal_subsidy(pol_l, w.mean, b.mean, w.stdev, math.sqrt(est_bl))
                offer = guarantee(t, required)
                if check_feasible and not var_gate(pol_l, w.mean + b.mean, sd, offer):
                    raise GuaranteeError(t, offer, required)
        outcome, state = run_period(state, rng, t, subsidy=offer)
        outcomes.append(outcome)
        path_l.append(outcome.estimates["BL"])
        path_h.append(outcome.estimates["BH"])
        total += outcome.subsidy
    tau, recross = _escape_time([o.l_gate_unsubsidized for o in outcomes])
    final = {g + bank: state.estimate(bank, g) for g in GROUPS for bank in BANKS}
    return TrajectoryRecord(outcomes, path_l, path_h, tau, recross, total, final)


def _stream(config: ScenarioConfig, seed: Optional[int], stream_id: int) -> RandomStream:
    return RandomStream(config.seed if seed is None else seed, stream_id)


def run_baseline(
    config: ScenarioConfig, seed: Optional[int] = None, stream_id: int = 0, validate: bool = True
) -> TrajectoryRecord:
    """No intervention: the trap dynamics."""
    config = config.with_mode(SubsidyMode.NONE)
    if validate:
        validate_trap(config)
    return _simulate(config, _stream(config, seed, stream_id), None)


def run_adaptive_subsidy(
    config: ScenarioConfig, seed: Optional[int] = None, stream_id: int = 0
) -> TrajectoryRecord:
    """Pay the minimal subsidy each period L's own gate would refuse B.

    The subsidy and the gate both use the mode's metric (VaR or ES).
    """
    if config.subsidy_mode not in (SubsidyMode.ADAPTIVE_VAR, SubsidyMode.ADAPTIVE_ES):
        raise ValueError(f"adaptive subsidy needs adaptive_var or adaptive_es, got {config.subsidy_mode.value}")
    return _simulate(config, _stream(config, seed, stream_id), _exact_subsidy)


def run_with_guarantee(
    config: ScenarioConfig,
    policy: GuaranteePolicy,
    seed: Optional[int] = None,
    stream_id: int = 0,
) -> TrajectoryRecord:
    """Run with an arbitrary guarantee schedule in place of the minimal subsidy.

    Raises :class:`GuaranteeError` at the first period where the scheduled
    amount leaves L's constraint unmet.
    """
    return _simulate(config, _stream(config, seed, stream_id), policy.amount, check_feasible=True)


def run(config: ScenarioConfig, seed: Optional[int] = None, stream_id: int = 0, validate: bool = False) -> TrajectoryRecord:
    """Dispatch on ``config.subsidy_mode``."""
    mode = config.subsidy_mode
    if mode is SubsidyMode.NONE:
        return run_baseline(config, seed, stream_id, validate=validate)
    if validate:
        validate_trap(config)
    if mode is SubsidyMode.CUSTOM_GUARANTEE:
        return run_with_guarantee(config, GuaranteePolicy.from_spec(config.guarantee), seed, stream_id)
    return run_adaptive_subsidy(config, seed, stream_id)


def detect_trap(trajectory: TrajectoryRecord) -> bool:
    """True iff L never approved B and its belief about B never moved."""
    if trajectory.degenerate:
        log.warning("detect_trap on an empty trajectory is vacuously true")
        return True
    first = trajectory.belief_path_L[0]
    return all(not o.approvals["L"][1] for o in trajectory.outcomes) and all(
        x == first for x in trajectory.belief_path_L
    ) and trajectory.final_estimates.get("BL", first) == first


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicationSummary:
    replication: int
    tau: Optional[int]
    recross_count: int
    total_subsidy: float
    trapped: bool
    initial_sigma2_BL: float
    terminal_sigma2_BL: float
    mean_premium_before: Optional[float]
    mean_premium_after: Optional[float]
    h_withdrawal_rate: float


def summarize(trajectory: TrajectoryRecord, replication: int = 0, initial: float = math.nan) -> ReplicationSummary:
    before, after = trajectory.b_premiums()
    return ReplicationSummary(
        replication=replication,
        tau=trajectory.tau,
        recross_count=trajectory.recross_count,
        total_subsidy=trajectory.total_subsidy,
        trapped=detect_trap(trajectory),
        initial_sigma2_BL=initial,
        terminal_sigma2_BL=trajectory.final_estimates.get("BL", initial),
        mean_premium_before=statistics.fmean(before) if before else None,
        mean_premium_after=statistics.fmean(after) if after else None,
        h_withdrawal_rate=trajectory.h_withdrawal_rate(),
    )


def _replicate(args: Tuple[ScenarioConfig, int]) -> ReplicationSummary:
    config, r = args
    traj = run(config, stream_id=r)
    return summarize(traj, r, config.initial_estimate("L", "B"))


@dataclass(frozen=True)
class MonteCarloReport:
    replications: List[ReplicationSummary]
    horizon: int
    escape_by_horizon: Dict[int, float]

    @property
    def escape_probability(self) -> float:
        return sum(1 for s in self.replications if s.tau is not None) / len(self.replications)

    @property
    def taus(self) -> List[int]:
        return [s.tau for s in self.replications if s.tau is not None]

    @property
    def mean_tau(self) -> Optional[float]:
        return statistics.fmean(self.taus) if self.taus else None

    @property
    def median_tau(self) -> Optional[float]:
        return float(statistics.median(self.taus)) if self.taus else None

    @property
    def mean_total_subsidy(self) -> float:
        return statistics.fmean(s.total_subsidy for s in self.replications)

    @property
    def mean_terminal_sigma2_BL(self) -> float:
        return statistics.fmean(s.terminal_sigma2_BL for s in self.replications)

    @property
    def mean_initial_sigma2_BL(self) -> float:
        return statistics.fmean(s.initial_sigma2_BL for s in self.replications)

    def _mean_of(self, attr: str) -> Optional[float]:
        vals = [getattr(s, attr) for s in self.replications if getattr(s, attr) is not None]
        return statistics.fmean(vals) if vals else None

    @property
    def mean_premium_before(self) -> Optional[float]:
        return self._mean_of("mean_premium_before")

    @property
    def mean_premium_after(self) -> Optional[float]:
        return self._mean_of("mean_premium_after")

    @property
    def mean_h_withdrawal_rate(self) -> float:
        return statistics.fmean(s.h_withdrawal_rate for s in self.replications)

    def as_dict(self) -> Dict[str, object]:
        return {
            "replications": len(self.replications),
            "horizon": self.horizon,
            "escape_probability": self.escape_probability,
            "escape_probability_by_horizon": {str(h): p for h, p in self.escape_by_horizon.items()},
            "mean_tau": self.mean_tau,
            "median_tau": self.median_tau,
            "mean_total_subsidy": self.mean_total_subsidy,
            "mean_premium_B_before_tau": self.mean_premium_before,
            "mean_premium_B_after_tau": self.mean_premium_after,
            "mean_h_withdrawal_rate": self.mean_h_withdrawal_rate,
            "mean_initial_sigma2_BL": self.mean_initial_sigma2_BL,
            "mean_terminal_sigma2_BL": self.mean_terminal_sigma2_BL,
        }


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


def _horizon_grid(horizon: int) -> List[int]:
    if horizon <= 0:
        return []
    return sorted({max(1, round(horizon * f)) for f in (0.01, 0.05, 0.1, 0.25, 0.5, 1.0)})


def monte_carlo(config: ScenarioConfig, workers: Optional[int] = None) -> MonteCarloReport:
    """Run ``config.replications`` replications, replication r on stream r.

    Replications are independent, so the report is identical whatever the
    worker count.
    """
    n_workers = worker_count() if workers is None else max(1, workers)
    jobs = [(config, r) for r in range(config.replications)]
    if n_workers == 1 or len(jobs) == 1:
        results = [_replicate(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))
    by_h = {
        h: sum(1 for s in results if s.tau is not None and s.tau <= h) / len(results)
        for h in _horizon_grid(config.horizon)
    }
    return MonteCarloReport(results, config.horizon, by_h)
