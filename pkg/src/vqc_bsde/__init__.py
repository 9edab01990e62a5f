"""Deep BSDE solver for semilinear parabolic PDEs with dense-network or
simulated variational-quantum-circuit control approximators."""

from .approximators import MLP, Adam, Approximator, ZeroControl
from .paths import (BrownianIncrements, PathBatch, TimeGrid, sample_increments,
                    simulate_forward)
from .problems import (BlackScholesParams, HjbParams, ProblemSpec, bs_closed_form, hjb_exact,
                       make_black_scholes, make_constant, make_hjb)
from .quantum import VqcModel
from .solver import SolverConfig, TrainableHead, TrainReport, evaluate, rollout, train

__version__ = "0.1.0"

__all__ = [
    "MLP", "Adam", "Approximator", "ZeroControl",
    "BrownianIncrements", "PathBatch", "TimeGrid", "sample_increments", "simulate_forward",
    "BlackScholesParams", "HjbParams", "ProblemSpec", "bs_closed_form", "hjb_exact",
    "make_black_scholes", "make_constant", "make_hjb",
    "VqcModel",
    "SolverConfig", "TrainableHead", "TrainReport", "evaluate", "rollout", "train",
]
