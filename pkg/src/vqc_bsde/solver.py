"""Deep BSDE rollout and training.

Y starts from a trainable y0 and is pushed forward along each simulated path,

    Y_{n+1} = Y_n - f(t_n, X_n, Y_n, Z_n) dt + Z_n . dW_n,   Z_n = approx(t_n / T, X_n),

and (y0, approximator) minimize mean |Y_N - g(X_N)|^2. Gradients are computed
by a reverse sweep over the Y recursion; the approximator supplies its own
vector-Jacobian product.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .approximators import Adam, Approximator
from .paths import (PathBatch, SimulationError, TimeGrid, derive_seed, sample_increments,
                    simulate_forward)
from .problems import ProblemSpec

Array = np.ndarray


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss, state or gradient."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    num_paths: int = 10_000
    batch_size: int = 100
    epochs: int = 10
    learning_rate: float = 0.01
    num_steps: int = 10
    seed: int = 0
    # y0 starts uniformly within +-y0_init_halfwidth * |c| of the zero-control
    # fit c over the training paths and moves in units of y0_scale * |c|.
    y0_init_halfwidth: float = 0.05
    y0_scale: float = 0.1
    shuffle: bool = False

    def __post_init__(self):
        for name in ("num_paths", "batch_size", "epochs", "num_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.num_paths % self.batch_size:
            raise ValueError("num_paths must be divisible by batch_size")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.y0_init_halfwidth < 0 or not self.y0_scale > 0:
            raise ValueError("y0_init_halfwidth must be >= 0 and y0_scale > 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def iterations(self) -> int:
        return self.epochs * (self.num_paths // self.batch_size)


@dataclass
class TrainableHead:
    """y0 = offset + scale * param, with only ``param`` trained."""

    offset: float = 0.0
    scale: float = 1.0
    param: Array = field(default_factory=lambda: np.zeros(1))

    @property
    def y0(self) -> float:
        return float(self.offset + self.scale * self.param[0])

    @classmethod
    def at(cls, y0: float, offset: float = 0.0, scale: float = 1.0) -> "TrainableHead":
        return cls(offset, scale, np.array([(y0 - offset) / scale]))


@dataclass
class TrainReport:
    y0: float
    losses: tuple[float, ...]
    seed: int
    label: str = ""
    oracle: float | None = None
    wall_clock: float = field(default=0.0, compare=False)

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    @property
    def abs_error(self) -> float | None:
        return None if self.oracle is None else abs(self.y0 - self.oracle)

    @property
    def relative_error(self) -> float | None:
        return None if self.oracle is None else relative_error(self.y0, self.oracle)


@dataclass(frozen=True)
class EvalResult:
    loss: float
    stderr: float
    y0: float


def relative_error(predicted: float, exact: float) -> float:
    return abs(predicted - exact) / abs(exact)


def _y0_value(y0) -> float:
    return y0.y0 if isinstance(y0, TrainableHead) else float(y0)


def _time_features(paths: PathBatch) -> Array:
    grid = paths.grid
    return np.tile(grid.times[:-1] / grid.horizon, paths.batch)


def controls(approx: Approximator, paths: PathBatch) -> Array:
    """Z at t_0 .. t_{N-1} for every path, [batch, N, d]. Z at t_N is never needed."""
    batch, n_steps = paths.batch, paths.grid.num_steps
    x = paths.features[:, :n_steps, :].reshape(batch * n_steps, -1)
    return approx.forward(_time_features(paths), x).reshape(batch, n_steps, -1)


def _y_trajectory(spec: ProblemSpec, paths: PathBatch, y0: float, Z: Array) -> Array:
    grid = paths.grid
    dt, times = grid.dt, grid.times
    dW = paths.increments.values
    Y = np.empty((paths.batch, grid.num_steps + 1))
    Y[:, 0] = y0
    for n in range(grid.num_steps):
        y = Y[:, n]
        f = spec.driver(times[n], paths.states[:, n, :], y, Z[:, n, :])
        Y[:, n + 1] = y - f * dt + np.sum(Z[:, n, :] * dW[:, n, :], axis=1)
        if not np.all(np.isfinite(Y[:, n + 1])):
            raise SimulationError(f"non-finite Y at step {n + 1}", n + 1)
    return Y


def rollout(spec: ProblemSpec, paths: PathBatch, y0, approx: Approximator) -> Array:
    """Terminal values Y_N per path, starting from ``y0`` (a float or TrainableHead)."""
    if paths.states.shape[2] != spec.dim:
        raise ValueError(f"paths have dimension {paths.states.shape[2]}, problem has {spec.dim}")
    if approx.dim != spec.dim:
        raise ValueError(f"approximator has dimension {approx.dim}, problem has {spec.dim}")
    return _y_trajectory(spec, paths, _y0_value(y0), controls(approx, paths))[:, -1]


def loss_and_grads(spec: ProblemSpec, paths: PathBatch, y0: float,
                   approx: Approximator) -> tuple[float, float, dict[str, Array]]:
    """Batch loss mean |Y_N - g(X_N)|^2 and its gradients w.r.t. y0 and the approximator."""
    grid = paths.grid
    dt, times = grid.dt, grid.times
    batch, n_steps = paths.batch, grid.num_steps
    dW = paths.increments.values

    Z = controls(approx, paths)
    Y = _y_trajectory(spec, paths, y0, Z)
    residual = Y[:, -1] - spec.terminal(paths.states[:, -1, :])
    loss = float(np.mean(residual ** 2))

    adj = 2.0 * residual / batch  # dL/dY_{n+1}
    dZ = np.empty_like(Z)
    for n in reversed(range(n_steps)):
        fy, fz = spec.driver_grad(times[n], paths.states[:, n, :], Y[:, n], Z[:, n, :])
        dZ[:, n, :] = adj[:, None] * (dW[:, n, :] - fz * dt)
        adj = adj * (1.0 - fy * dt)
    dy0 = float(np.sum(adj))

    x = paths.features[:, :n_steps, :].reshape(batch * n_steps, -1)
    grads = approx.backward(_time_features(paths), x, dZ.reshape(batch * n_steps, -1))
    return loss, dy0, grads


def zero_control_fit(spec: ProblemSpec, paths: PathBatch, tol: float = 1e-12,
                     max_iter: int = 50) -> float:
    """y0 whose Z = 0 rollout matches the batch mean of g(X_N), by Newton iteration."""
    grid = paths.grid
    zero = np.zeros((paths.batch, grid.num_steps, spec.dim))
    target = float(np.mean(spec.terminal(paths.states[:, -1, :])))
    y = target
    for _ in range(max_iter):
        Y = _y_trajectory(spec, paths, y, zero)
        sens = np.ones(paths.batch)
        for n in range(grid.num_steps):
            fy, _ = spec.driver_grad(grid.times[n], paths.states[:, n, :], Y[:, n], zero[:, n, :])
            sens = sens * (1.0 - fy * grid.dt)
        step = (float(np.mean(Y[:, -1])) - target) / float(np.mean(sens))
        y -= step
        if abs(step) <= tol * (1.0 + abs(y)):
            break
    return y


def simulate_paths(spec: ProblemSpec, num_paths: int, num_steps: int, seed: int) -> PathBatch:
    grid = TimeGrid(spec.horizon, num_steps)
    incs = sample_increments(seed, num_paths, grid, spec.dim)
    return simulate_forward(spec, incs, grid)


def init_head(spec: ProblemSpec, paths: PathBatch, config: SolverConfig) -> TrainableHead:
    """Head centered on the zero-control fit over the training paths."""
    center = zero_control_fit(spec, paths)
    unit = abs(center) if center != 0.0 else 1.0
    rng = np.random.default_rng(derive_seed(config.seed, "y0"))
    start = center + rng.uniform(-1.0, 1.0) * config.y0_init_halfwidth * unit
    return TrainableHead.at(start, offset=center, scale=config.y0_scale * unit)


def train(spec: ProblemSpec, config: SolverConfig, approx: Approximator,
          oracle_value: float | None = None, log_every: int = 0) -> tuple[TrainReport, TrainableHead]:
    """Fit (y0, approximator) by Adam on minibatches of a fixed path set.

    Returns the report and the trained head; ``approx`` is updated in place.
    """
    started = time.perf_counter()
    paths = simulate_paths(spec, config.num_paths, config.num_steps,
                           derive_seed(config.seed, "paths"))
    n_batches = config.num_paths // config.batch_size
    order_rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))

    def epoch_order() -> Array:
        if config.shuffle:
            return order_rng.permutation(config.num_paths)
        return np.arange(config.num_paths)

    order = epoch_order()
    try:
        head = init_head(spec, paths, config)
    except SimulationError as exc:
        raise DivergenceError(f"initialization: {exc}", 0) from exc
    optimizer = Adam(lr=config.learning_rate)
    params = {"head/y0": head.param}
    params.update({f"model/{k}": v for k, v in approx.trainable_params().items()})

    losses = []
    iteration = 0
    for epoch in range(config.epochs):
        if epoch > 0:
            order = epoch_order()
        for b in range(n_batches):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            batch = paths.take(idx) if config.shuffle else paths.take(slice(idx[0], idx[-1] + 1))
            try:
                loss, dy0, grads = loss_and_grads(spec, batch, head.y0, approx)
            except SimulationError as exc:
                raise DivergenceError(f"iteration {iteration}: {exc}", iteration) from exc
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at iteration {iteration}", iteration)
            losses.append(loss)
            step_grads = {"head/y0": np.array([dy0 * head.scale])}
            step_grads.update({f"model/{k}": v for k, v in grads.items()})
            try:
                optimizer.step(params, step_grads)
            except FloatingPointError as exc:
                raise DivergenceError(f"iteration {iteration}: {exc}", iteration) from exc
            if log_every and iteration % log_every == 0:
                print(f"[{spec.label}] it={iteration} loss={loss:.6g} y0={head.y0:.6g}", flush=True)
            iteration += 1

    report = TrainReport(y0=head.y0, losses=tuple(losses), seed=config.seed, label=spec.label,
                         oracle=oracle_value, wall_clock=time.perf_counter() - started)
    return report, head


def evaluate(spec: ProblemSpec, head, approx: Approximator, fresh_seed: int,
             num_paths: int, num_steps: int = 10) -> EvalResult:
    """Out-of-sample terminal loss on freshly simulated paths; changes no parameters."""
    paths = simulate_paths(spec, num_paths, num_steps, fresh_seed)
    y0 = _y0_value(head)
    sq = (rollout(spec, paths, y0, approx) - spec.terminal(paths.states[:, -1, :])) ** 2
    stderr = float(sq.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else math.inf
    return EvalResult(float(sq.mean()), stderr, y0)
