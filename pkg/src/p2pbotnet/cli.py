"""Command line entry point: ``p2pbotnet {detect,generate,score,sweep}``.

Exit codes: 0 success, 2 bad configuration, 3 bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .flow_model import FlowError, InternalNetworks, orient_flows, read_flow_csv
from .p2p_hosts import cluster_flows, write_cluster_stats
from .pipeline import (SWEEPABLE, PipelineConfig, PipelineError, compute_metrics, emit_report,
                       load_report, run_pipeline, sweep, write_sweep_csv)
from .synth import GenConfig, GenerationError, GroundTruth, generate_dataset

log = logging.getLogger("p2pbotnet")

EXIT_CONFIG = 2
EXIT_INPUT = 3


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


def _threshold_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (flags override --config)")
    g.add_argument("--config", help="key=value file with pipeline settings")
    g.add_argument("--theta-dd", type=int)
    g.add_argument("--theta-mcr", type=float)
    g.add_argument("--theta-avgddr", type=float)
    g.add_argument("--theta-avgmcr", type=float)
    g.add_argument("--resolution", type=float, dest="louvain_resolution")
    g.add_argument("--seed", type=int, dest="louvain_seed")
    g.add_argument("--internal-cidr", action="append", dest="internal_cidrs",
                   help="internal network block; repeat for several")
    g.add_argument("--workers", type=int, dest="worker_count")


def _pipeline_config(args) -> PipelineConfig:
    try:
        values: dict = PipelineConfig.read_kv(args.config) if args.config else {}
        for key in ("theta_dd", "theta_mcr", "theta_avgddr", "theta_avgmcr", "louvain_resolution",
                    "louvain_seed", "internal_cidrs", "worker_count"):
            if getattr(args, key, None) is not None:
                values[key] = getattr(args, key)
        return PipelineConfig.from_mapping(values)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _read_flows(path):
    try:
        return read_flow_csv(path)
    except (OSError, FlowError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _read_truth(path) -> GroundTruth:
    try:
        return GroundTruth.read_csv(path)
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_detect(args) -> int:
    cfg = _pipeline_config(args)
    flows = _read_flows(args.flows)
    try:
        report = run_pipeline(flows, cfg)
    except PipelineError as exc:
        raise InputError(str(exc)) from exc
    if args.dump_clusters:
        oriented = orient_flows(flows, InternalNetworks(cfg.internal_cidrs))
        with open(args.dump_clusters, "w") as fh:
            write_cluster_stats(cluster_flows(oriented), fh, cfg.theta_dd)
    if args.truth:
        report.metrics = compute_metrics(report, _read_truth(args.truth))
    if args.report:
        emit_report(report, args.report, args.format)
    else:
        sys.stdout.write(report.to_json() if args.format == "json" else report.to_csv_summary())
    counts = " -> ".join(str(report.stage_counts[k]) for k in report.stage_counts)
    log.info("hosts per stage: %s", counts)
    return 0


def cmd_generate(args) -> int:
    try:
        cfg = GenConfig.from_dict(json.loads(Path(args.gen_config).read_text())) if args.gen_config else GenConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.n_internal is not None:
            cfg.n_internal = args.n_internal
        cfg.validate()
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        ds = generate_dataset(cfg)
    except GenerationError as exc:
        raise ConfigError(str(exc)) from exc
    paths = ds.write(args.out_dir)
    log.info("wrote %d flows for %d internal hosts to %s", len(ds.flows), len(ds.truth.labels),
             paths["flows"].parent)
    return 0


def cmd_score(args) -> int:
    try:
        report = load_report(args.report_in)
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{args.report_in}: {exc}") from exc
    try:
        report.metrics = compute_metrics(report, _read_truth(args.truth))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.report:
        emit_report(report, args.report, "json")
    sys.stdout.write(json.dumps(report.metrics, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_sweep(args) -> int:
    cfg = _pipeline_config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}") from exc
    if len(values) < 1:
        raise ConfigError("--values needs at least one number")
    flows = _read_flows(args.flows)
    truth = _read_truth(args.truth)
    try:
        rows = sweep(flows, truth, args.param, values, cfg)
    except PipelineError as exc:
        raise InputError(str(exc)) from exc
    if args.report:
        with open(args.report, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="p2pbotnet", description="P2P botnet detection on flow records")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run the pipeline on a flow CSV")
    p.add_argument("flows")
    p.add_argument("--truth", help="ground truth CSV; adds metrics to the report")
    p.add_argument("--report", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv-summary"), default="json")
    p.add_argument("--dump-clusters", metavar="CSV", help="write stage-1 flow cluster stats for debugging")
    _threshold_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("generate", help="write a labelled synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--gen-config", help="JSON generator config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-internal", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", help="score a JSON report against ground truth")
    p.add_argument("report_in", metavar="REPORT")
    p.add_argument("truth")
    p.add_argument("--report", help="write the report with metrics filled in")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", help="metric curves over one threshold")
    p.add_argument("flows")
    p.add_argument("truth")
    p.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    p.add_argument("--values", required=True, help="comma-separated grid")
    p.add_argument("--report", help="output CSV (default: stdout)")
    _threshold_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
