"""Command-line entry point: ``subprime-sim {thresholds,simulate,sweep}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import report
from .engine import GuaranteeError, monte_carlo, run
from .scenario import (
    ScenarioConfig,
    ScenarioError,
    SubsidyMode,
    check_assumptions,
    config_from_dict,
    config_to_dict,
    read_scenario_doc,
    set_path,
    validate_trap,
)

log = logging.getLogger("subprime_sim")

MODES = {
    "baseline": SubsidyMode.NONE,
    "adaptive-var": SubsidyMode.ADAPTIVE_VAR,
    "adaptive-es": SubsidyMode.ADAPTIVE_ES,
    "guarantee": SubsidyMode.CUSTOM_GUARANTEE,
}
AGGREGATIONS = {"sum-of-stds": "sum_of_stds", "independent": "independent"}


class CliError(Exception):
    pass


def _resolve(doc: Dict[str, Any], args: argparse.Namespace) -> ScenarioConfig:
    config = config_from_dict(doc)
    if getattr(args, "mode", None):
        config = config.with_mode(MODES[args.mode])
    if getattr(args, "aggregation", None):
        config = config.with_aggregation(AGGREGATIONS[args.aggregation])
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    if getattr(args, "replications", None) is not None:
        updates["replications"] = args.replications
    return replace(config, **updates) if updates else config


def _out_dir(path: Optional[str]) -> Path:
    if path is None:
        raise CliError("--out is required")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory {out} is not writable: {exc}") from None
    return out


def _write_manifest(out: Path, scenario: str, config: ScenarioConfig, files: Dict[str, bytes], extra: Optional[dict] = None) -> None:
    manifest = {
        "scenario": str(scenario),
        "config": config_to_dict(config),
        "output_dir": str(out),
        "files": {name: report.digest(data) for name, data in sorted(files.items())},
    }
    if extra:
        manifest.update(extra)
    report.write_json(out / "manifest.json", manifest)


def cmd_thresholds(args: argparse.Namespace) -> int:
    config = _resolve(read_scenario_doc(args.scenario), args)
    ts = config.thresholds()
    checks = check_assumptions(config)
    pol_l, pol_h = config.lending_policy_l(), config.policies["H"]

    lines = [f"scenario: {args.scenario}", "thresholds (bounds on believed B variance):"]
    for name, value in report.thresholds_dict(ts).items():
        lines.append(f"  {name:<18} {value!r}")
    lines.append(f"  {'L gate bound':<18} {config.l_pooled_bound()!r}  (metric={pol_l.metric.value}, aggregation={pol_l.aggregation.value})")
    ordered = ts.ordered()
    lines.append(
        "ordering L_uni < L_pool < H_uni < H_pool: " + ("PASS" if ordered else "FAIL")
    )
    lines.append("ES pooled bound below VaR pooled bound: " + ("PASS" if ts.es_conservative() else "FAIL"))
    warnings = []
    for bank, pol in (("L", pol_l), ("H", pol_h)):
        if not pol.ordering_guaranteed:
            warnings.append(f"bank {bank}: alpha={pol.alpha} >= 0.1; the threshold ordering is only guaranteed for alpha < 0.1")
    if config.nu_max <= 0:
        warnings.append("nu_max = 0; the threshold ordering needs a positive premium")
    lines.append("assumptions:")
    for c in checks:
        lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    for w in warnings:
        lines.append(f"warning: {w}")
    print("\n".join(lines))

    if args.out:
        out = _out_dir(args.out)
        data = report.write_json(
            out / "thresholds.json",
            {
                "thresholds": report.thresholds_dict(ts),
                "bound_L_pool_gate": config.l_pooled_bound(),
                "ordering": ordered,
                "es_conservative": ts.es_conservative(),
                "assumptions": report.assumptions_list(checks),
                "warnings": warnings,
            },
        )
        _write_manifest(out, args.scenario, config, {"thresholds.json": data})

    if args.validate and not all(c.passed for c in checks):
        return 1
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _resolve(read_scenario_doc(args.scenario), args)
    out = _out_dir(args.out)
    checks = check_assumptions(config)
    if args.validate:
        validate_trap(config)

    traj = run(config, seed=config.seed, stream_id=0)
    files = {
        "trajectory.csv": report.write_trajectory_csv(out / "trajectory.csv", traj),
        "beliefs.csv": report.write_beliefs_csv(out / "beliefs.csv", traj, config),
        "summary.json": report.write_json(
            out / "summary.json", report.trajectory_summary(traj, config, config.seed, checks)
        ),
    }
    if config.replications > 1:
        mc = monte_carlo(config)
        files["montecarlo.json"] = report.write_json(out / "montecarlo.json", mc.as_dict())
        files["replications.csv"] = report.write_replications_csv(out / "replications.csv", mc)
    if args.figures:
        files["trajectory.png"] = report.plot_trajectory(out / "trajectory.png", traj, config)
    _write_manifest(out, args.scenario, config, files)
    tau = "none" if traj.tau is None else str(traj.tau)
    print(f"mode={config.subsidy_mode.value} horizon={traj.horizon} tau={tau} "
          f"total_subsidy={traj.total_subsidy!r} -> {out}")
    return 0


def _load_sweep(path: str) -> Dict[str, Any]:
    try:
        spec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(spec, dict) or "parameter" not in spec or "values" not in spec:
        raise ScenarioError(f"{path}: sweep spec needs 'parameter' and 'values'")
    if not isinstance(spec["values"], list):
        raise ScenarioError(f"{path}: 'values' must be a list")
    return spec


def cmd_sweep(args: argparse.Namespace) -> int:
    doc = read_scenario_doc(args.scenario)
    spec = _load_sweep(args.sweep)
    out = _out_dir(args.out)
    if args.replications is None and "replications" in spec:
        args.replications = int(spec["replications"])
    parameter = spec["parameter"]
    rows: List[List[str]] = []
    for value in spec["values"]:
        try:
            config = _resolve(set_path(doc, parameter, value), args)
        except (ScenarioError, ValueError) as exc:
            log.warning("sweep point %s=%r invalid: %s", parameter, value, exc)
            rows.append(report.sweep_row(value, None, str(exc)))
            continue
        initial = config.initial_estimate("L", "B")
        if args.validate:
            try:
                validate_trap(config)
            except ScenarioError as exc:
                log.warning("sweep point %s=%r invalid: %s", parameter, value, exc)
                rows.append(report.sweep_row(value, None, str(exc), initial))
                continue
        try:
            mc = monte_carlo(config)
        except GuaranteeError as exc:
            rows.append(report.sweep_row(value, None, str(exc), initial))
            continue
        rows.append(report.sweep_row(value, mc))
    files = {"sweep.csv": report.write_sweep_csv(out / "sweep.csv", rows)}
    if args.figures and any(r[1] == "1" for r in rows):
        try:
            files["sweep.png"] = report.plot_sweep(out / "sweep.png", parameter, rows)
        except ValueError:
            log.warning("sweep values are not numeric; skipping figure")
    _write_manifest(out, args.scenario, config_from_dict(doc), files, {"sweep": spec})
    print(f"sweep {parameter}: {len(rows)} points -> {out / 'sweep.csv'}")
    return 0


def _add_common(p: argparse.ArgumentParser, run_flags: bool = True) -> None:
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--mode", choices=sorted(MODES), help="override the scenario's subsidy mode")
    p.add_argument("--aggregation", choices=sorted(AGGREGATIONS), help="how the two groups' risks combine")
    p.add_argument("--out", help="output directory")
    v = p.add_mutually_exclusive_group()
    v.add_argument("--validate-assumptions", dest="validate", action="store_true", default=True,
                   help="require the trap assumptions to hold (default)")
    v.add_argument("--no-validate", dest="validate", action="store_false",
                   help="waive the trap-assumption checks")
    if run_flags:
        p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
        p.add_argument("--replications", type=int, help="Monte Carlo replications")
        p.add_argument("--horizon", type=int, help="number of periods T")
        p.add_argument("--no-figures", dest="figures", action="store_false", default=True,
                       help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subprime-sim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="print variance thresholds and assumption checks")
    _add_common(p, run_flags=False)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("simulate", help="run one trajectory and write CSV/JSON/figures")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="Monte Carlo over a parameter grid")
    _add_common(p)
    p.add_argument("--sweep", required=True, help="sweep spec JSON: parameter, values, replications")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, GuaranteeError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
