"""Output layer: per-period CSV, summary JSON, run manifests and figures.

Floats are written as Python's shortest round-trip ``repr`` so every numeric
cell parses back to the identical double.  Figures are rendered off-screen
with the Agg canvas; PNG metadata is stripped so reruns are byte-stable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .engine import MonteCarloReport, TrajectoryRecord, detect_trap
from .risk import ThresholdSet
from .scenario import AssumptionCheck, ScenarioConfig

TRAJECTORY_COLUMNS = [
    "t",
    "A_W_L", "A_W_H", "A_B_L", "A_B_H",
    "S_W", "S_B",
    "nu", "s",
    "pi_W", "pi_B",
    "Pi_L", "Pi_H",
    "sigma2_BL", "sigma2_BH",
]
BELIEF_COLUMNS = ["t", "sigma2_WL", "sigma2_WH", "sigma2_BL", "sigma2_BH", "bound_L_pool", "sigma2_B_true"]
SWEEP_COLUMNS = [
    "value", "valid", "error",
    "escape_probability", "mean_tau", "median_tau", "mean_total_subsidy",
    "mean_pre_tau_premium", "mean_post_tau_premium",
    "mean_initial_sigma2_BL", "mean_terminal_sigma2_BL",
]


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _joined(values: Sequence[Any]) -> str:
    return ";".join(fmt(v) for v in values)


def trajectory_rows(traj: TrajectoryRecord) -> Iterable[List[str]]:
    for o in traj.outcomes:
        yield [
            fmt(o.t),
            fmt(o.approvals["L"][0]), fmt(o.approvals["H"][0]),
            fmt(o.approvals["L"][1]), fmt(o.approvals["H"][1]),
            _joined(o.acceptances["W"]), _joined(o.acceptances["B"]),
            fmt(float(o.premium)), fmt(float(o.subsidy)),
            _joined(o.payoffs["W"]), _joined(o.payoffs["B"]),
            fmt(o.profit_L), fmt(o.profit_H),
            fmt(o.estimates["BL"]), fmt(o.estimates["BH"]),
        ]


def _csv_bytes(header: Sequence[str], rows: Iterable[Sequence[str]]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def write_trajectory_csv(path: Path, traj: TrajectoryRecord) -> bytes:
    data = _csv_bytes(TRAJECTORY_COLUMNS, trajectory_rows(traj))
    path.write_bytes(data)
    return data


def write_beliefs_csv(path: Path, traj: TrajectoryRecord, config: ScenarioConfig) -> bytes:
    bound = config.l_pooled_bound()
    true_b = config.groups["B"].variance
    rows = (
        [fmt(o.t)] + [fmt(o.estimates[k]) for k in ("WL", "WH", "BL", "BH")] + [fmt(bound), fmt(true_b)]
        for o in traj.outcomes
    )
    data = _csv_bytes(BELIEF_COLUMNS, rows)
    path.write_bytes(data)
    return data


def _clean(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def json_bytes(doc: Mapping[str, Any]) -> bytes:
    return (json.dumps(_clean(dict(doc)), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


def write_json(path: Path, doc: Mapping[str, Any]) -> bytes:
    data = json_bytes(doc)
    path.write_bytes(data)
    return data


def thresholds_dict(ts: ThresholdSet) -> Dict[str, float]:
    return {
        "sigma2_L_uni": ts.sigma2_L_uni,
        "sigma2_L_pool": ts.sigma2_L_pool,
        "sigma2_H_uni": ts.sigma2_H_uni,
        "sigma2_H_pool": ts.sigma2_H_pool,
        "sigma2_L_pool_es": ts.sigma2_L_pool_es,
    }


def assumptions_list(checks: Sequence[AssumptionCheck]) -> List[Dict[str, Any]]:
    return [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks]


def trajectory_summary(
    traj: TrajectoryRecord,
    config: ScenarioConfig,
    seed: int,
    checks: Optional[Sequence[AssumptionCheck]] = None,
) -> Dict[str, Any]:
    before, after = traj.b_premiums()
    return {
        "mode": config.subsidy_mode.value,
        "seed": seed,
        "horizon": traj.horizon,
        "tau": traj.tau,
        "escaped": traj.escaped,
        "recross_count": traj.recross_count,
        "total_subsidy": traj.total_subsidy,
        "trapped": detect_trap(traj),
        "premiums_B": {
            "mean_before_tau": sum(before) / len(before) if before else None,
            "mean_after_tau": sum(after) / len(after) if after else None,
            "total_paid": sum(before) + sum(after),
        },
        "h_withdrawal_rate": traj.h_withdrawal_rate(),
        "profit_totals": {
            "L": sum(o.profit_L for o in traj.outcomes),
            "H": sum(o.profit_H for o in traj.outcomes),
            "L_with_subsidy": sum(o.profit_L + o.subsidy for o in traj.outcomes),
        },
        "initial_estimates": {k: config.initial_estimate(k[1], k[0]) for k in ("WL", "WH", "BL", "BH")},
        "final_estimates": traj.final_estimates,
        "bound_L_pool": config.l_pooled_bound(),
        "thresholds": thresholds_dict(config.thresholds()),
        "assumptions": assumptions_list(checks) if checks is not None else None,
    }


def sweep_row(value: Any, report: Optional[MonteCarloReport], error: str = "", initial: Optional[float] = None) -> List[str]:
    if report is None:
        return [fmt(value), "0", error] + [""] * 7 + [fmt(initial), ""]
    return [
        fmt(value), "1", error,
        fmt(report.escape_probability), fmt(report.mean_tau), fmt(report.median_tau),
        fmt(report.mean_total_subsidy),
        fmt(report.mean_premium_before), fmt(report.mean_premium_after),
        fmt(report.mean_initial_sigma2_BL), fmt(report.mean_terminal_sigma2_BL),
    ]


def write_sweep_csv(path: Path, rows: Sequence[Sequence[str]]) -> bytes:
    data = _csv_bytes(SWEEP_COLUMNS, rows)
    path.write_bytes(data)
    return data


def write_replications_csv(path: Path, report: MonteCarloReport) -> bytes:
    header = [
        "replication", "tau", "recross_count", "total_subsidy", "trapped",
        "initial_sigma2_BL", "terminal_sigma2_BL", "mean_premium_before", "mean_premium_after",
        "h_withdrawal_rate",
    ]
    rows = (
        [fmt(s.replication), fmt(s.tau), fmt(s.recross_count), fmt(s.total_subsidy), fmt(s.trapped),
         fmt(s.initial_sigma2_BL), fmt(s.terminal_sigma2_BL), fmt(s.mean_premium_before),
         fmt(s.mean_premium_after), fmt(s.h_withdrawal_rate)]
        for s in report.replications
    )
    data = _csv_bytes(header, rows)
    path.write_bytes(data)
    return data


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

_PNG_META = {"Software": None}


def _save(fig: Figure, path: Path) -> bytes:
    FigureCanvasAgg(fig)
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, metadata=_PNG_META)
    data = buf.getvalue()
    path.write_bytes(data)
    return data


def plot_trajectory(path: Path, traj: TrajectoryRecord, config: ScenarioConfig) -> bytes:
    """Two panels: L's and H's belief about B against L's bound; premium and subsidy."""
    fig = Figure(figsize=(8, 6))
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    t = [o.t for o in traj.outcomes]
    ax1.plot(t, traj.belief_path_L, color="#2E86AB", lw=1.2, label=r"$\hat\sigma^2_{BL}$")
    ax1.plot(t, traj.belief_path_H, color="#A23B72", lw=1.0, alpha=0.8, label=r"$\hat\sigma^2_{BH}$")
    ax1.axhline(config.l_pooled_bound(), color="k", ls="--", lw=0.8, label="L pooled bound")
    ax1.axhline(config.groups["B"].variance, color="#6A994E", ls=":", lw=0.8, label=r"true $\sigma^2_B$")
    if traj.tau is not None:
        ax1.axvline(traj.tau, color="#F18F01", lw=0.8, label=r"$\tau$")
    ax1.set_ylabel("belief about B variance")
    ax1.legend(frameon=False, fontsize=8)
    ax2.step(t, [o.premium for o in traj.outcomes], where="post", color="#E74C3C", lw=1.0, label=r"premium $\nu_t$")
    ax2.step(t, [o.subsidy for o in traj.outcomes], where="post", color="#374151", lw=1.0, label=r"subsidy $s_t$")
    ax2.set_xlabel("period")
    ax2.legend(frameon=False, fontsize=8)
    if t and max(t) > 200:
        ax1.set_xscale("log")
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(path: Path, parameter: str, rows: Sequence[Sequence[str]]) -> bytes:
    valid = [r for r in rows if r[1] == "1"]
    fig = Figure(figsize=(8, 4))
    ax1, ax2 = fig.subplots(1, 2)
    xs = [float(r[0]) for r in valid]
    ax1.plot(xs, [float(r[3]) for r in valid], "o-", color="#2E86AB")
    ax1.set_xlabel(parameter)
    ax1.set_ylabel("escape probability")
    ax1.set_ylim(-0.05, 1.05)
    ax2.plot(xs, [float(r[6]) for r in valid], "s-", color="#374151")
    ax2.set_xlabel(parameter)
    ax2.set_ylabel("mean total subsidy")
    fig.tight_layout()
    return _save(fig, path)
