"""Seedable simulator of a two-bank, two-group credit market under VaR/ES
risk constraints: the subprime trap and escape through temporary subsidies."""

from .beliefs import (
    BeliefState,
    CreditFileSpec,
    posterior_variance_estimate,
    prior_from_credit_file,
    update_batch,
    update_with_return,
)
from .engine import (
    GuaranteeError,
    GuaranteePolicy,
    MonteCarloReport,
    TrajectoryRecord,
    detect_trap,
    monte_carlo,
    run,
    run_adaptive_subsidy,
    run_baseline,
    run_with_guarantee,
)
from .market import GroupProfile, PeriodOutcome, PricingState, h_payoff
from .risk import (
    Aggregation,
    Metric,
    RiskPolicy,
    ThresholdSet,
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
from .scenario import ScenarioConfig, ScenarioError, SubsidyMode, check_assumptions, load_scenario
from .stats import (
    DomainError,
    InvGammaParams,
    NormalParams,
    RandomStream,
    inv_gamma_mean,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    sample_normal,
)

__version__ = "0.1.0"
