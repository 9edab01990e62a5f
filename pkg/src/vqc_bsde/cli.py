"""Command line entry point.

    vqc-bsde init   [--config PATH]                 write the template config
    vqc-bsde oracle --config PATH [--out DIR]       exact values for the sweep grid
    vqc-bsde train  --config PATH [--out DIR]       one training run
    vqc-bsde sweep  --config PATH [--out DIR] [--workers N]

``--seed-override`` replaces the oracle seed (oracle), the solver seed
(train) or the sweep base seed (sweep).

Exit codes: 0 success, 1 divergence (train) or every run failed (sweep),
2 configuration error, 3 sweep finished with some failed runs.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

from .checkpoint import save_checkpoint
from .config import ConfigError, RunConfig, dump_config, load_config
from .experiments import (SweepSpec, oracle_value, run_single, run_sweep, summarize,
                          write_results_csv, write_summary_csv)
from .solver import DivergenceError

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2, 3

ORACLE_COLUMNS = ("sweep_value", "option_type_or_lambda", "oracle", "oracle_stderr")
LOSS_COLUMNS = ("iteration", "loss")
TRAIN_COLUMNS = ("label", "arch", "seed", "y0", "oracle", "rel_err", "abs_err", "final_loss")


def _say(msg: str) -> None:
    print(msg, flush=True)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _out_dir(args, config: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_init(args) -> int:
    path = Path(args.config or "config.yaml")
    if path.exists() and not args.force:
        _say(f"error: {path} exists (use --force to overwrite)")
        return EXIT_CONFIG
    path.write_text(dump_config(RunConfig()), encoding="utf-8")
    _say(f"wrote {path}")
    return EXIT_OK


def cmd_oracle(args, config: RunConfig) -> int:
    if args.seed_override is not None:
        config = dataclasses.replace(
            config, oracle=dataclasses.replace(config.oracle, seed=args.seed_override))
    spec = SweepSpec.from_run_config(config)
    out = _out_dir(args, config)
    rows = []
    for value, kind in spec.points():
        est = oracle_value(spec.point_problem(value, kind), config.oracle)
        rows.append([repr(float(value)), kind, repr(est.value), repr(est.stderr)])
        _say(f"{kind:>8} {value:>8g}  oracle={est.value:.10g}  stderr={est.stderr:.3g}")
    _write_csv(out / "oracle.csv", ORACLE_COLUMNS, rows)
    return EXIT_OK


def cmd_train(args, config: RunConfig) -> int:
    solver = config.solver
    if args.seed_override is not None:
        solver = dataclasses.replace(solver, seed=args.seed_override)
    out = _out_dir(args, config)
    try:
        report, head, approx = run_single(config.problem, config.model, solver, config.oracle)
    except DivergenceError as exc:
        _say(f"error: training diverged: {exc}")
        return EXIT_DIVERGED
    save_checkpoint(out / "checkpoint.npz", approx, head,
                    extra={"label": report.label, "seed": report.seed})
    _write_csv(out / "losses.csv", LOSS_COLUMNS,
               [[i, repr(loss)] for i, loss in enumerate(report.losses)])
    _write_csv(out / "train_summary.csv", TRAIN_COLUMNS,
               [[report.label, config.model.arch, report.seed, repr(report.y0),
                 repr(report.oracle), repr(report.relative_error), repr(report.abs_error),
                 repr(report.final_loss)]])
    _say(f"{report.label} arch={config.model.arch} seed={report.seed} y0={report.y0:.8g} "
         f"oracle={report.oracle:.8g} rel_err={100 * report.relative_error:.4f}% "
         f"final_loss={report.final_loss:.6g} wall={report.wall_clock:.1f}s")
    return EXIT_OK


def cmd_sweep(args, config: RunConfig) -> int:
    if args.seed_override is not None:
        config = dataclasses.replace(
            config, sweep=dataclasses.replace(config.sweep, base_seed=args.seed_override))
    workers = args.workers if args.workers is not None else config.workers
    spec = SweepSpec.from_run_config(config)
    out = _out_dir(args, config)

    def progress(r):
        if r.ok:
            _say(f"{r.kind:>8} {r.sweep_value:>8g} seed={r.seed} y0={r.y0:.8g} "
                 f"oracle={r.oracle:.8g} rel_err={100 * r.rel_error:.4f}%")
        else:
            _say(f"{r.kind:>8} {r.sweep_value:>8g} seed={r.seed} FAILED: {r.message}")

    report = run_sweep(spec, workers=workers, progress=progress)
    write_results_csv(out / "results.csv", report)
    write_summary_csv(out / "summary.csv", summarize(report))
    if report.n_failed == 0:
        return EXIT_OK
    return EXIT_DIVERGED if report.n_failed == len(report.results) else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqc-bsde",
                                     description="Deep BSDE solver with MLP or VQC controls")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("init", "oracle", "train", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration")
        if name == "init":
            p.add_argument("--force", action="store_true", help="overwrite an existing file")
            continue
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--workers", type=int, help="parallel sweep jobs")
        p.add_argument("--seed-override", type=int, dest="seed_override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "init":
        return cmd_init(args)
    if not args.config:
        _say("error: --config is required")
        return EXIT_CONFIG
    try:
        config = load_config(args.config)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.seed_override is not None and args.seed_override < 0:
            raise ConfigError("--seed-override must be >= 0")
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return EXIT_CONFIG
    handler = {"oracle": cmd_oracle, "train": cmd_train, "sweep": cmd_sweep}[args.command]
    return handler(args, config)


if __name__ == "__main__":
    sys.exit(main())
