"""Nonlinear HJB benchmark in 100 dimensions over 24 values of lambda, five seeds.

    python scripts/hjb_sweep.py --out runs/hjb [--arch vqc] [--workers 4] [--quick]

Oracle values come from the certainty-equivalent Monte Carlo formula with
10^6 samples per lambda (shared across lambdas, so computed once).
"""
import dataclasses

from _common import parse_args, quick_version, run

from vqc_bsde.config import ModelConfig, ProblemConfig, RunConfig

MODELS = {
    "mlp": ModelConfig(arch="mlp", hidden=(64, 64, 64, 64)),
    "vqc": ModelConfig(arch="vqc", n_qubits=2, n_layers=2),
}


def main() -> None:
    args = parse_args(__doc__.splitlines()[0])
    for arch in args.archs:
        config = RunConfig(problem=ProblemConfig(family="hjb", dim=100), model=MODELS[arch])
        if args.quick:
            config = quick_version(config)
            config = dataclasses.replace(config, sweep=dataclasses.replace(
                config.sweep, lambdas=(1.0, 10.0, 60.0)))
        run(config, args.out / arch, args.workers)


if __name__ == "__main__":
    main()
