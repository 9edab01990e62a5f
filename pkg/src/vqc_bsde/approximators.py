"""Control approximators (t/T, x) -> z in R^d, and the Adam optimizer.

Every approximator works on batches: ``forward(t, x)`` takes time features of
shape [M] and states of shape [M, d] and returns controls [M, d].
``backward(t, x, upstream)`` returns the gradient of
sum_m upstream[m] . forward(t, x)[m] with respect to the trainable
parameters only; frozen tensors never appear in the result.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

Array = np.ndarray


class Approximator:
    kind = "base"

    def __init__(self, dim: int):
        self.dim = dim
        self.params: dict[str, Array] = {}
        self.trainable: tuple[str, ...] = ()

    def forward(self, t: Array, x: Array) -> Array:
        raise NotImplementedError

    def backward(self, t: Array, x: Array, upstream: Array) -> dict[str, Array]:
        raise NotImplementedError

    def freeze(self, *names: str) -> None:
        unknown = set(names) - set(self.params)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)}")
        self.trainable = tuple(n for n in self.trainable if n not in names)

    def trainable_params(self) -> dict[str, Array]:
        return {name: self.params[name] for name in self.trainable}

    def metadata(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "trainable": list(self.trainable)}

    def _check_inputs(self, t: Array, x: Array) -> tuple[Array, Array]:
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"expected states of shape [M, {self.dim}], got {x.shape}")
        if t.shape != (x.shape[0],):
            raise ValueError(f"expected time features of shape [{x.shape[0]}], got {t.shape}")
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError("time features must lie in [0, 1]")
        if not np.all(np.isfinite(x)):
            raise ValueError("states must be finite")
        return t, x

    def _check_upstream(self, x: Array, upstream: Array) -> Array:
        upstream = np.asarray(upstream, dtype=float)
        if upstream.shape != x.shape:
            raise ValueError(f"upstream gradient has shape {upstream.shape}, expected {x.shape}")
        return upstream


class ZeroControl(Approximator):
    """z = 0 everywhere; has no parameters."""

    kind = "zero"

    def forward(self, t, x):
        t, x = self._check_inputs(t, x)
        return np.zeros_like(x)

    def backward(self, t, x, upstream):
        return {}


class MLP(Approximator):
    """Dense network on [x, t] with rectifier hidden layers and a linear output layer.

    Parameters are named W0, b0, W1, b1, ...; W_k has shape [fan_in, fan_out].
    """

    kind = "mlp"

    def __init__(self, dim: int, hidden: Sequence[int] = (64, 64, 64, 64), seed: int = 0,
                 zero: bool = False):
        super().__init__(dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.seed = seed
        widths = self.widths
        rng = np.random.default_rng(seed)
        for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            if zero:
                W = np.zeros((fan_in, fan_out))
            else:
                W = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
            self.params[f"W{k}"] = W
            self.params[f"b{k}"] = np.zeros(fan_out)
        self.trainable = tuple(self.params)

    @property
    def widths(self) -> list[int]:
        return [self.dim + 1, *self.hidden, self.dim]

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def _activations(self, t: Array, x: Array) -> list[Array]:
        h = np.concatenate([x, t[:, None]], axis=1)
        acts = [h]
        last = self.n_layers - 1
        for k in range(self.n_layers):
            h = h @ self.params[f"W{k}"] + self.params[f"b{k}"]
            if k < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return acts

    def forward(self, t, x):
        t, x = self._check_inputs(t, x)
        return self._activations(t, x)[-1]

    def backward(self, t, x, upstream):
        t, x = self._check_inputs(t, x)
        delta = self._check_upstream(x, upstream)
        acts = self._activations(t, x)
        wanted = set(self.trainable)
        grads = {}
        for k in reversed(range(self.n_layers)):
            if k < self.n_layers - 1:
                delta = delta * (acts[k + 1] > 0.0)
            if f"W{k}" in wanted:
                grads[f"W{k}"] = acts[k].T @ delta
            if f"b{k}" in wanted:
                grads[f"b{k}"] = delta.sum(axis=0)
            if k > 0:
                delta = delta @ self.params[f"W{k}"].T
        return {name: grads[name] for name in self.trainable}

    def metadata(self):
        return {**super().metadata(), "hidden": list(self.hidden), "seed": self.seed}


class Adam:
    """Adam with bias correction. Updates parameter arrays in place."""

    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: dict[str, Array] = {}
        self.v: dict[str, Array] = {}

    def step(self, params: dict[str, Array], grads: dict[str, Array]) -> None:
        for name in grads:
            if not np.all(np.isfinite(grads[name])):
                raise FloatingPointError(
                    f"non-finite gradient for '{name}' at optimizer step {self.step_count + 1}")
            if grads[name].shape != np.shape(params[name]):
                raise ValueError(f"gradient for '{name}' has shape {grads[name].shape}, "
                                 f"parameter has {np.shape(params[name])}")
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for name in sorted(grads):
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
