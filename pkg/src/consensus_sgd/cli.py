"""Command-line entry point: ``run``, ``compare``, ``sweep`` and ``bounds``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import harness
from .harness import ConfigError, RunConfig, RunDivergedError


def _common(p: argparse.ArgumentParser):
    p.add_argument("config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    p.add_argument("--out-dir", help="output directory (overrides run.out_dir)")
    p.add_argument("--deterministic", action="store_true", help="full-batch gradients, zero noise constants")
    p.add_argument("--workers", type=int, help="threads for per-agent gradient evaluation")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config entry")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-sgd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run one configuration"))
    p = sub.add_parser("compare", help="run several algorithms on the same setup")
    _common(p)
    p.add_argument("--algorithms", nargs="+", required=True, help='e.g. cdmsgd "icdmsgd:tau=2" "gcdmsgd:omega=0.1"')
    p = sub.add_parser("sweep", help="vary omega, tau or alpha")
    _common(p)
    p.add_argument("--param", required=True, choices=harness.SWEEP_PARAMS)
    p.add_argument("--values", nargs="+", required=True)
    _common(sub.add_parser("bounds", help="closed-form bounds for a configuration"))
    return parser


def load_config(args) -> RunConfig:
    config = RunConfig.from_yaml(args.config)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.out_dir is not None:
        overrides.append(f"run.out_dir={args.out_dir}")
    if args.deterministic:
        overrides.append("algorithm.mode=deterministic")
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    return config.with_overrides(overrides)


def _out_dir(config: RunConfig) -> Path:
    return Path(config.run.out_dir or "runs") / config.config_hash()


def cmd_run(config: RunConfig) -> int:
    exp = harness.build_experiment(config)
    out = _out_dir(config)
    try:
        record = harness.run(exp)
    except RunDivergedError as exc:
        harness.write_outputs(exc.record, out, exp)
        print(f"diverged: {exc}; partial record written to {out}", file=sys.stderr)
        return 2
    report = harness.bounds(config, record)
    harness.write_outputs(record, out, exp, report)
    doc = record.degree_of_consensus
    final = dict(zip(harness.METRIC_COLUMNS, record.rows[-1]))
    print(f"{record.kind}: k={final['k']} V={final['V']:.6g} F={final['F']:.6g} "
          f"consensus_error={final['consensus_error']:.3g} gap({doc.metric})={doc.gap:.4g}")
    print(f"outputs in {out}")
    return 0


def cmd_compare(config: RunConfig, algorithms) -> int:
    configs = [config.with_overrides(algorithm=harness.parse_algorithm_spec(a)) for a in algorithms]
    result = harness.compare(configs)
    out = _out_dir(config) / "compare"
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.csv").write_text(result.to_csv())
    for label, rec in zip(result.labels, result.records):
        harness.write_outputs(rec, out / rec.config_hash)
    doc = {label: vars(d) for label, d in result.degree_of_consensus.items()}
    (out / "degree_of_consensus.json").write_text(json.dumps(doc, indent=2))
    for label, d in result.degree_of_consensus.items():
        print(f"{label:40s} gap={d.gap:.4g} best={d.best_agent_metric:.4g} worst={d.worst_agent_metric:.4g}")
    print(f"outputs in {out}")
    return 0


def cmd_sweep(config: RunConfig, param, raw_values) -> int:
    values = [yaml.safe_load(v) for v in raw_values]
    report = harness.sweep(config, param, values)
    out = _out_dir(config) / f"sweep-{param}"
    out.mkdir(parents=True, exist_ok=True)
    summary = report.summary()
    (out / "sweep.json").write_text(json.dumps({"param": param, "rows": summary, "order_by_gap": report.ordering()}, indent=2))
    for rec, value in zip(report.records, values):
        harness.write_outputs(rec, out / f"{param}={value}")
    for row in summary:
        flag = f"  [{row['flag']}]" if row["flag"] else ""
        print(f"{param}={row[param]!s:8s} status={row['status']:9s} F={row['final_F']:.6g} gap={row['consensus_gap']:.4g}{flag}")
    return 0


def cmd_bounds(config: RunConfig) -> int:
    report = harness.bounds(config)
    out = _out_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bounds.json").write_text(report.to_json())
    (out / "bounds.txt").write_text(report.render_table() + "\n")
    print(report.render_table())
    for flag in report.flags:
        print(f"note: {flag}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "compare":
            return cmd_compare(config, args.algorithms)
        if args.command == "sweep":
            return cmd_sweep(config, args.param, args.values)
        return cmd_bounds(config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
