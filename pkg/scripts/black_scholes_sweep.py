"""Black-Scholes portfolio benchmark: calls and puts over eight strikes, five seeds.

    python scripts/black_scholes_sweep.py --out runs/bs [--arch vqc] [--workers 4] [--quick]

Writes <out>/<arch>/{config.yaml,results.csv,summary.csv}. The full run is
2 x 8 x 5 = 80 trainings per architecture on 100-dimensional portfolios.
"""
import dataclasses

from _common import parse_args, quick_version, run

from vqc_bsde.config import ModelConfig, ProblemConfig, RunConfig

MODELS = {
    "mlp": ModelConfig(arch="mlp", hidden=(64, 64, 64, 64)),
    "vqc": ModelConfig(arch="vqc", n_qubits=4, n_layers=2),
}


def main() -> None:
    args = parse_args(__doc__.splitlines()[0])
    for arch in args.archs:
        config = RunConfig(problem=ProblemConfig(family="black_scholes", dim=100),
                           model=MODELS[arch])
        if args.quick:
            config = quick_version(config)
            config = dataclasses.replace(config, sweep=dataclasses.replace(
                config.sweep, strikes=(90.0, 110.0)))
        run(config, args.out / arch, args.workers)


if __name__ == "__main__":
    main()
