"""Repeated-seed sweeps over strikes or lambdas, compared against exact oracles.

CSV schemas (UTF-8, comma separated, header row first):

    results:  sweep_value, option_type_or_lambda, arch, seed, y0, oracle, rel_err,
              abs_err, oracle_stderr, final_loss, status
    summary:  sweep_value, option_type_or_lambda, arch, mean_rel_err_pct,
              std_rel_err_pct, n_seeds, n_failed, mean_abs_err

``option_type_or_lambda`` is "call"/"put" for Black-Scholes rows, "lambda"
for HJB rows and "constant" for the degenerate test problem. Failed runs keep
their row with status "failed" and empty numeric fields; they are counted in
``n_failed`` and excluded from the means. Standard deviations use the n-1
convention and are empty when fewer than two seeds succeeded.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .approximators import MLP, Approximator
from .config import ModelConfig, OracleConfig, ProblemConfig, RunConfig
from .paths import derive_seed
from .problems import (BlackScholesParams, HjbParams, OracleEstimate, ProblemSpec,
                       bs_closed_form, hjb_exact, make_black_scholes, make_constant, make_hjb)
from .quantum import VqcModel
from .solver import DivergenceError, SolverConfig, TrainReport, TrainableHead, train

RESULT_COLUMNS = ("sweep_value", "option_type_or_lambda", "arch", "seed", "y0", "oracle",
                  "rel_err", "abs_err", "oracle_stderr", "final_loss", "status")
SUMMARY_COLUMNS = ("sweep_value", "option_type_or_lambda", "arch", "mean_rel_err_pct",
                   "std_rel_err_pct", "n_seeds", "n_failed", "mean_abs_err")


def bs_params(problem: ProblemConfig) -> BlackScholesParams:
    return BlackScholesParams(rate=problem.rate, vol=problem.vol, strike=problem.strike,
                              spot=problem.spot, is_call=problem.option_type == "call",
                              num_options=problem.dim)


def build_problem(problem: ProblemConfig) -> ProblemSpec:
    if problem.family == "black_scholes":
        return make_black_scholes(bs_params(problem), problem.horizon)
    if problem.family == "hjb":
        return make_hjb(HjbParams(problem.lam, problem.dim), problem.horizon)
    return make_constant(problem.dim, problem.constant_value, problem.horizon)


def oracle_value(problem: ProblemConfig, oracle: OracleConfig) -> OracleEstimate:
    """u(0, xi): closed form for Black-Scholes, Monte Carlo for HJB."""
    if problem.family == "black_scholes":
        return OracleEstimate(bs_closed_form(bs_params(problem), problem.horizon), 0.0)
    if problem.family == "hjb":
        params = HjbParams(problem.lam, problem.dim)
        return hjb_exact(params, problem.horizon, np.zeros(problem.dim), 0.0,
                         oracle.mc_samples, oracle.seed)
    return OracleEstimate(problem.constant_value, 0.0)


def build_model(model: ModelConfig, dim: int, seed: int) -> Approximator:
    """Approximator whose random initialization is derived from the run seed."""
    init_seed = derive_seed(seed, "model")
    if model.arch == "mlp":
        return MLP(dim, hidden=model.hidden, seed=init_seed)
    adapter_seed = model.adapter_seed if model.adapter_seed is not None \
        else derive_seed(seed, "adapters")
    return VqcModel(dim, model.n_qubits, model.n_layers, seed=init_seed,
                    adapter_seed=adapter_seed, decoder_variance=model.decoder_variance)


def run_single(problem: ProblemConfig, model: ModelConfig, solver: SolverConfig,
               oracle: OracleConfig) -> tuple[TrainReport, TrainableHead, Approximator]:
    spec = build_problem(problem)
    approx = build_model(model, spec.dim, solver.seed)
    report, head = train(spec, solver, approx, oracle_value(problem, oracle).value)
    return report, head, approx


@dataclass(frozen=True)
class SweepSpec:
    problem: ProblemConfig
    model: ModelConfig
    solver: SolverConfig
    oracle: OracleConfig
    values: tuple[float, ...]
    option_types: tuple[str, ...] = ("call", "put")
    repetitions: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "SweepSpec":
        family, sweep = config.problem.family, config.sweep
        if family == "black_scholes":
            values, kinds = sweep.strikes, sweep.option_types
        elif family == "hjb":
            values, kinds = sweep.lambdas, ()
        else:
            values, kinds = (config.problem.constant_value,), ()
        return cls(config.problem, config.model, config.solver, config.oracle,
                   tuple(values), tuple(kinds), sweep.repetitions, sweep.base_seed)

    def points(self) -> list[tuple[float, str]]:
        family = self.problem.family
        if family == "black_scholes":
            return [(v, kind) for kind in self.option_types for v in self.values]
        if family == "hjb":
            return [(v, "lambda") for v in self.values]
        return [(v, "constant") for v in self.values]

    def point_problem(self, value: float, kind: str) -> ProblemConfig:
        if kind in ("call", "put"):
            return dataclasses.replace(self.problem, strike=value, option_type=kind)
        if kind == "lambda":
            return dataclasses.replace(self.problem, lam=value)
        return dataclasses.replace(self.problem, constant_value=value)

    def seed_for(self, value: float, kind: str, rep: int) -> int:
        return derive_seed(self.base_seed, kind, repr(float(value)), rep)

    def jobs(self) -> list[tuple[float, str, int]]:
        jobs = [(v, kind, self.seed_for(v, kind, r))
                for v, kind in self.points() for r in range(self.repetitions)]
        seeds = [s for _, _, s in jobs]
        if len(set(seeds)) != len(seeds):
            raise RuntimeError("derived seeds collide within the sweep")
        return jobs


@dataclass(frozen=True)
class SeedResult:
    sweep_value: float
    kind: str
    arch: str
    seed: int
    y0: float
    oracle: float
    oracle_stderr: float
    losses: tuple[float, ...] = field(repr=False)
    status: str = "ok"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def abs_error(self) -> float:
        return abs(self.y0 - self.oracle)

    @property
    def rel_error(self) -> float:
        return abs(self.y0 - self.oracle) / abs(self.oracle)


@dataclass(frozen=True)
class ExperimentReport:
    family: str
    arch: str
    results: tuple[SeedResult, ...]

    def points(self) -> list[tuple[float, str]]:
        seen = {}
        for r in self.results:
            seen.setdefault((r.sweep_value, r.kind), None)
        return list(seen)

    def for_point(self, value: float, kind: str) -> list[SeedResult]:
        return [r for r in self.results if (r.sweep_value, r.kind) == (value, kind)]

    def mean_loss_curve(self, value: float, kind: str) -> np.ndarray:
        curves = [r.losses for r in self.for_point(value, kind) if r.ok]
        return np.mean(np.array(curves), axis=0) if curves else np.empty(0)

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.results)


@dataclass(frozen=True)
class SummaryRow:
    sweep_value: float
    option_type_or_lambda: str
    arch: str
    mean_rel_err_pct: float | None
    std_rel_err_pct: float | None
    n_seeds: int
    n_failed: int
    mean_abs_err: float | None


def _run_job(spec: SweepSpec, value: float, kind: str, seed: int) -> SeedResult:
    problem = spec.point_problem(value, kind)
    oracle = oracle_value(problem, spec.oracle)
    if problem.family == "black_scholes" and not oracle.value > 0:
        raise RuntimeError(f"non-positive oracle value {oracle.value} for {kind} K={value}")
    solver = dataclasses.replace(spec.solver, seed=seed)
    approx = build_model(spec.model, problem.dim, seed)
    try:
        report, _ = train(build_problem(problem), solver, approx, oracle.value)
    except DivergenceError as exc:
        return SeedResult(value, kind, spec.model.arch, seed, math.nan, oracle.value,
                          oracle.stderr, (), status="failed", message=str(exc))
    return SeedResult(value, kind, spec.model.arch, seed, report.y0, oracle.value,
                      oracle.stderr, report.losses)


def _run_job_tuple(args) -> SeedResult:
    return _run_job(*args)


def run_sweep(spec: SweepSpec, workers: int = 1, progress=None) -> ExperimentReport:
    """Train every (sweep point, repetition) and collect results in sweep order.

    ``progress``, if given, is called with each SeedResult as it arrives.
    """
    jobs = [(spec, v, kind, seed) for v, kind, seed in spec.jobs()]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_job_tuple, jobs):
                results.append(res)
                if progress:
                    progress(res)
    else:
        for job in jobs:
            res = _run_job_tuple(job)
            results.append(res)
            if progress:
                progress(res)
    return ExperimentReport(spec.problem.family, spec.model.arch, tuple(results))


def summarize(report: ExperimentReport) -> list[SummaryRow]:
    rows = []
    for value, kind in report.points():
        seeds = report.for_point(value, kind)
        good = [r for r in seeds if r.ok]
        rel = np.array([100.0 * r.rel_error for r in good])
        mean = float(rel.mean()) if len(rel) else None
        std = float(rel.std(ddof=1)) if len(rel) > 1 else None
        abs_mean = float(np.mean([r.abs_error for r in good])) if good else None
        rows.append(SummaryRow(value, kind, report.arch, mean, std, len(good),
                               len(seeds) - len(good), abs_mean))
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_results_csv(path, report: ExperimentReport) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in report.results:
            ok = r.ok
            writer.writerow([_fmt(r.sweep_value), r.kind, r.arch, r.seed,
                             _fmt(r.y0 if ok else None), _fmt(r.oracle),
                             _fmt(r.rel_error if ok else None), _fmt(r.abs_error if ok else None),
                             _fmt(r.oracle_stderr), _fmt(r.losses[-1] if ok else None), r.status])
    return path


def write_summary_csv(path, rows: list[SummaryRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in SUMMARY_COLUMNS])
    return path
