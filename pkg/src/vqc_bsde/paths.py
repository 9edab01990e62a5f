"""Brownian increments and Euler-Maruyama forward paths.

Normal variates come from a counter-based Philox4x64 stream followed by the
Box-Muller transform. Every increment has a global index

    i = ((sample * N) + step) * d + coordinate

and is read from Philox block ``i // 4``, slot ``i % 4``: slots (0, 1) and
(2, 3) of a block are the uniform pairs fed to Box-Muller. The value of an
increment therefore depends only on (seed, sample, step, coordinate), so a
batch can be split across workers at any sample boundary and reassembled
bitwise.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .problems import ProblemSpec

_TWO_PI = 2.0 * math.pi
_INV_2_53 = 1.0 / 9007199254740992.0


class SimulationError(FloatingPointError):
    """Raised when a simulated quantity stops being finite."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    num_steps: int

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.num_steps

    @property
    def times(self) -> np.ndarray:
        """Grid points t_0 = 0, ..., t_N = T (endpoints exact)."""
        return np.linspace(0.0, self.horizon, self.num_steps + 1)


@dataclass
class BrownianIncrements:
    values: np.ndarray  # [batch, N, d]
    dt: float

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass
class PathBatch:
    states: np.ndarray  # [batch, N+1, d], natural variables
    increments: BrownianIncrements
    grid: TimeGrid
    log_states: np.ndarray | None = None  # set for log-space problems

    @property
    def features(self) -> np.ndarray:
        """State as seen by the approximator: log(X_t / X_0) for log-space problems."""
        if self.log_states is None:
            return self.states
        return self.log_states - self.log_states[:, :1, :]

    @property
    def batch(self) -> int:
        return self.states.shape[0]

    def take(self, index) -> "PathBatch":
        """Sub-batch by sample index (slice or integer array)."""
        incs = BrownianIncrements(self.increments.values[index], self.increments.dt)
        logs = None if self.log_states is None else self.log_states[index]
        return PathBatch(self.states[index], incs, self.grid, logs)


def philox_key(seed: int) -> np.ndarray:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)


def standard_normals(seed: int, start: int, count: int) -> np.ndarray:
    """Normals with global indices ``start .. start + count - 1`` of stream ``seed``."""
    if count == 0:
        return np.empty(0)
    first_block, offset = divmod(start, 4)
    n_blocks = (offset + count + 3) // 4
    counter = np.zeros(4, dtype=np.uint64)
    counter[0] = first_block
    bits = np.random.Philox(key=philox_key(seed), counter=counter).random_raw(4 * n_blocks)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    u = u.reshape(-1, 2)
    radius = np.sqrt(-2.0 * np.log(u[:, 0]))
    angle = _TWO_PI * u[:, 1]
    z = np.empty(u.shape)
    z[:, 0] = radius * np.cos(angle)
    z[:, 1] = radius * np.sin(angle)
    return z.reshape(-1)[offset:offset + count]


def sample_increments(seed: int, batch: int, grid: TimeGrid, dim: int,
                      start: int = 0) -> BrownianIncrements:
    """Brownian increments ~ N(0, dt) for samples ``start .. start + batch - 1``."""
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if start < 0:
        raise ValueError(f"start must be non-negative, got {start}")
    per_sample = grid.num_steps * dim
    z = standard_normals(seed, start * per_sample, batch * per_sample)
    values = z.reshape(batch, grid.num_steps, dim) * math.sqrt(grid.dt)
    return BrownianIncrements(values, grid.dt)


def simulate_forward(spec: "ProblemSpec", incs: BrownianIncrements,
                     grid: TimeGrid) -> PathBatch:
    """Euler-Maruyama recursion X_{n+1} = X_n + b(X_n) dt + sigma(X_n) dW_n.

    Log-space problems run the same recursion on log X with the log drift and
    log diffusion of the spec, then exponentiate.
    """
    if incs.dim != spec.dim:
        raise ValueError(f"increments have dimension {incs.dim}, problem has {spec.dim}")
    if incs.values.shape[1] != grid.num_steps:
        raise ValueError("increments and grid disagree on the number of steps")
    batch, n_steps, dim = incs.values.shape
    dt = grid.dt

    if spec.log_space:
        drift, diffusion = spec.log_drift, spec.log_diffusion
        start = np.log(spec.initial)
    else:
        drift, diffusion = spec.drift, spec.diffusion
        start = spec.initial

    sim = np.empty((batch, n_steps + 1, dim))
    sim[:, 0, :] = start
    for n in range(n_steps):
        x = sim[:, n, :]
        sim[:, n + 1, :] = x + drift(x) * dt + diffusion(x, incs.values[:, n, :])
        if not np.all(np.isfinite(sim[:, n + 1, :])):
            raise SimulationError(f"non-finite state produced at step {n + 1}", n + 1)

    if spec.log_space:
        states = np.exp(sim)
        states[:, 0, :] = spec.initial  # exp(log(x)) need not round-trip
        return PathBatch(states, incs, grid, log_states=sim)
    return PathBatch(sim, incs, grid)


def derive_seed(seed: int, *keys) -> int:
    """Deterministic 63-bit child seed of ``seed`` for the given keys (ints or strings)."""
    text = ":".join(str(k) for k in (seed, *keys)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1
