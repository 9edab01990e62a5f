"""Shared plumbing for the experiment scripts."""
from __future__ import annotations

import argparse
import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

from vqc_bsde.config import RunConfig, dump_config
from vqc_bsde.experiments import (SweepSpec, run_sweep, summarize, write_results_csv,
                                  write_summary_csv)


@dataclass(frozen=True)
class ScriptArgs:
    archs: tuple[str, ...]
    out: Path
    workers: int
    quick: bool


def parse_args(description: str) -> ScriptArgs:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--arch", choices=("mlp", "vqc", "both"), default="both")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--quick", action="store_true",
                        help="tiny run (few paths, one seed) to check the pipeline")
    ns = parser.parse_args()
    archs = ("mlp", "vqc") if ns.arch == "both" else (ns.arch,)
    return ScriptArgs(archs, ns.out, ns.workers, ns.quick)


def quick_version(config: RunConfig) -> RunConfig:
    solver = dataclasses.replace(config.solver, num_paths=200, batch_size=100, epochs=1)
    sweep = dataclasses.replace(config.sweep, repetitions=1)
    oracle = dataclasses.replace(config.oracle, mc_samples=min(config.oracle.mc_samples, 20_000))
    return dataclasses.replace(config, solver=solver, sweep=sweep, oracle=oracle)


def run(config: RunConfig, out: Path, workers: int) -> None:
    """Run one sweep, write its config and CSVs under ``out`` and print the summary."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(config), encoding="utf-8")
    started = time.perf_counter()
    report = run_sweep(SweepSpec.from_run_config(config), workers=workers)
    rows = summarize(report)
    write_results_csv(out / "results.csv", report)
    write_summary_csv(out / "summary.csv", rows)
    print(f"== {config.problem.family} / {config.model.arch}: {len(report.results)} runs, "
          f"{report.n_failed} failed, {time.perf_counter() - started:.0f}s -> {out}")
    for r in rows:
        mean = "n/a" if r.mean_rel_err_pct is None else f"{r.mean_rel_err_pct:8.3f}%"
        std = "" if r.std_rel_err_pct is None else f" +- {r.std_rel_err_pct:.3f}"
        print(f"  {r.option_type_or_lambda:>6} {r.sweep_value:>6g}  rel err {mean}{std}")
