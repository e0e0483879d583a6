"""Experiment runner: run / sweep / validate subcommands.

Output is a single deterministic CSV per invocation (fixed scientific
notation, 12 significant digits, '\\n' line endings); every row embeds the
scenario name, seed and schema version so it is reproducible from its own
metadata plus the config file.  Exit codes: 0 ok, 1 config error,
2 runtime error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import SCHEMA_VERSION, ConfigError, Scenario, apply_sweep_value, parse_config
from .engine import CI_METRICS, MetricsReport, run_replications
from .validate import run_battery

__all__ = ["main", "write_csv", "report_rows", "CSV_COLUMNS"]

CSV_COLUMNS = (
    "scenario",
    "replication_count",
    "class",
    "offered_rate",
    "throughput",
    "loss_prob",
    "mark_rate",
    "mql",
    "utilization",
    "mean_response",
    "ci_throughput",
    "ci_loss_prob",
    "ci_mark_rate",
    "ci_mql",
    "ci_utilization",
    "ci_mean_response",
    "seed",
    "schema_version",
)

_CI_COLS = ("throughput", "loss_prob", "mark_rate", "mql", "utilization", "mean_response")


def _num(x) -> str:
    return f"{x:.11e}"


def report_rows(scenario_name: str, report: MetricsReport, sweep_value=None):
    """One row per class plus the aggregate, as ordered string lists."""
    rows = []
    labels = report.labels() + ["all"]
    for lab in labels:
        m = report.aggregate if lab == "all" else report.per_class[lab]
        ci = report.ci.get(lab, {}) if report.ci else {}
        row = [
            scenario_name,
            str(report.replications),
            lab,
            _num(m.offered_rate),
            _num(m.throughput),
            _num(m.loss_prob),
            _num(m.mark_rate),
            _num(m.mql),
            _num(m.utilization),
            _num(m.mean_response),
        ]
        row += [_num(ci.get(c, 0.0)) for c in _CI_COLS]
        row += [str(report.seed), str(SCHEMA_VERSION)]
        if sweep_value is not None:
            row.insert(1, _format_sweep(sweep_value))
        rows.append(row)
    return rows


def _format_sweep(v) -> str:
    return str(v) if isinstance(v, int) else _num(v)


def write_csv(path: str, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _report_doc(report: MetricsReport):
    doc = {}
    for lab in report.labels() + ["all"]:
        m = report.aggregate if lab == "all" else report.per_class[lab]
        doc[lab] = {f: getattr(m, f) for f in CI_METRICS}
        doc[lab].update(
            {f: getattr(m, f) for f in ("offered", "admitted", "dropped", "marked", "departed")}
        )
        if report.ci:
            doc[lab]["ci"] = dict(report.ci[lab])
    return doc


def _load_scenario(args) -> Scenario:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    scenario = parse_config(text)
    seed = args.seed
    if seed is None and "BURSTQ_SEED" in os.environ:
        try:
            seed = int(os.environ["BURSTQ_SEED"])
        except ValueError as exc:
            raise ConfigError("BURSTQ_SEED must be an integer") from exc
    raw = dict(scenario.raw)
    if seed is not None:
        raw["seed"] = seed
    if args.replications is not None:
        raw["replications"] = args.replications
    if seed is not None or args.replications is not None:
        from .config import _build

        scenario = _build(raw)
    return scenario


def _out_path(scenario: Scenario, args) -> str:
    if args.out:
        return args.out
    if scenario.out:
        return scenario.out
    return f"{scenario.name}.csv"


def _cmd_run(args) -> int:
    scenario = _load_scenario(args)
    if scenario.sweep is not None:
        print("config contains a sweep block; use the sweep subcommand", file=sys.stderr)
        return 1
    report = run_replications(scenario.sim)
    rows = report_rows(scenario.name, report)
    write_csv(_out_path(scenario, args), CSV_COLUMNS, rows)
    if args.json:
        print(json.dumps({"scenario": scenario.name, "seed": scenario.sim.seed,
                          "results": _report_doc(report)}, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    if scenario.sweep is None:
        print("config has no sweep block; use the run subcommand", file=sys.stderr)
        return 1
    header = list(CSV_COLUMNS)
    header.insert(1, "sweep_value")
    rows = []
    doc = {}
    for value in scenario.sweep.values:
        point = apply_sweep_value(scenario, value)
        report = run_replications(point.sim)
        rows.extend(report_rows(scenario.name, report, sweep_value=value))
        doc[str(value)] = _report_doc(report)
    write_csv(_out_path(scenario, args), header, rows)
    if args.json:
        print(json.dumps({"scenario": scenario.name, "seed": scenario.sim.seed,
                          "sweep": scenario.sweep.parameter, "results": doc},
                         sort_keys=True))
    return 0


def _cmd_validate(args) -> int:
    results, findings = run_battery()
    if args.json:
        print(json.dumps({
            "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail}
                       for r in results],
            "findings": findings,
            "passed": all(r.passed for r in results),
        }, sort_keys=True))
    else:
        width = max(len(r.name) for r in results)
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{r.name:<{width}}  {status}  {r.detail}")
        for f in findings:
            print(f"finding: {f}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="burstq",
        description="queue-management simulator and analytic cross-validation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario, write one CSV")
    p_run.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="execute a parameter sweep, write one CSV")
    p_sweep.add_argument("config")
    for p in (p_run, p_sweep):
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--out", default=None, help="CSV output path")
        p.add_argument("--json", action="store_true", help="also print a JSON document")
    p_val = sub.add_parser("validate", help="run the oracle battery")
    p_val.add_argument("--json", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures must not masquerade as results
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
