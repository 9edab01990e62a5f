"""Dense statevector simulation of the variational circuit used as a control approximator.

Conventions: a state on n qubits is an array of 2**n amplitudes, optionally
with leading batch axes. Qubit 0 is the most significant bit of the basis
index, so |q0 q1 ... q_{n-1}> has index sum_q q_k 2**(n-1-k).

The circuit is

    |0...0>  --RY(pi tanh(E [x; t]))-->  [RY(theta_l) on every qubit, CNOT ring] x L  -->  <Z_q>

followed by the fixed linear decoder D. Only RY and CNOT are used, so the
model keeps amplitudes real; the gate kernels accept complex input too.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .approximators import Approximator

Array = np.ndarray

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
CNOT = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 0, 1.0], [0, 0, 1.0, 0]])

SHIFT = math.pi / 2


def ry(theta) -> Array:
    """RY(theta) = exp(-i theta Y / 2); batched if ``theta`` is an array."""
    c = np.cos(np.asarray(theta) / 2)
    s = np.sin(np.asarray(theta) / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def rx(theta) -> Array:
    c = np.cos(np.asarray(theta) / 2)
    s = -1j * np.sin(np.asarray(theta) / 2)
    return np.stack([np.stack([c + 0j, s], -1), np.stack([s, c + 0j], -1)], -2)


def rz(theta) -> Array:
    e = np.exp(-0.5j * np.asarray(theta))
    z = np.zeros_like(e)
    return np.stack([np.stack([e, z], -1), np.stack([z, np.conj(e)], -1)], -2)


def zero_state(n_qubits: int, batch: int | None = None, dtype=float) -> Array:
    shape = (2 ** n_qubits,) if batch is None else (batch, 2 ** n_qubits)
    state = np.zeros(shape, dtype=dtype)
    state[..., 0] = 1.0
    return state


def num_qubits(state: Array) -> int:
    size = state.shape[-1]
    n = size.bit_length() - 1
    if size < 2 or 1 << n != size:
        raise ValueError(f"state length {size} is not a power of two >= 2")
    return n


def _check_targets(targets: Sequence[int], n: int) -> None:
    for q in targets:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for a {n}-qubit register")
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target qubits {tuple(targets)}")


def _apply_1q(state: Array, matrix: Array, q: int, n: int) -> Array:
    """``matrix`` is [..., 2, 2]; its leading axes broadcast against the state's."""
    lead = state.shape[:-1]
    view = state.reshape(*lead, 2 ** q, 2, 2 ** (n - q - 1))
    a0, a1 = view[..., 0, :], view[..., 1, :]
    m = matrix[..., None, None]
    out = np.empty(np.broadcast_shapes(view.shape, matrix.shape[:-2] + (1, 1, 1)),
                   dtype=np.result_type(state, matrix))
    out[..., 0, :] = m[..., 0, 0, :, :] * a0 + m[..., 0, 1, :, :] * a1
    out[..., 1, :] = m[..., 1, 0, :, :] * a0 + m[..., 1, 1, :, :] * a1
    return out.reshape(*out.shape[:-3], 2 ** n)


def _apply_cnot(state: Array, control: int, target: int, n: int) -> Array:
    lead = state.shape[:-1]
    view = state.reshape(-1, *([2] * n))
    out = view.copy()
    sel = [slice(None)] * (n + 1)
    sel[control + 1] = 1
    sel = tuple(sel)
    flip_axis = target + 1 if target < control else target
    out[sel] = np.flip(view[sel], axis=flip_axis)
    return out.reshape(*lead, 2 ** n)


def _apply_2q(state: Array, matrix: Array, q0: int, q1: int, n: int) -> Array:
    lead = state.shape[:-1]
    view = state.reshape(-1, *([2] * n))
    moved = np.moveaxis(view, (q0 + 1, q1 + 1), (-2, -1))
    rest = moved.shape[:-2]
    out = (moved.reshape(*rest, 4) @ matrix.T).reshape(*rest, 2, 2)
    out = np.moveaxis(out, (-2, -1), (q0 + 1, q1 + 1))
    return out.reshape(*lead, 2 ** n)


def apply_gate(state: Array, gate: Array, targets: Sequence[int]) -> Array:
    """Apply a 2x2 (one target) or 4x4 (two targets, first is the most significant) unitary.

    A one-qubit gate may carry batch axes matching the state's, for per-sample angles.
    """
    n = num_qubits(state)
    targets = tuple(int(q) for q in targets)
    _check_targets(targets, n)
    gate = np.asarray(gate)
    if gate.shape[-2:] == (2, 2) and len(targets) == 1:
        return _apply_1q(state, gate, targets[0], n)
    if gate.shape == (4, 4) and len(targets) == 2:
        if np.array_equal(gate, CNOT):
            return _apply_cnot(state, targets[0], targets[1], n)
        return _apply_2q(state, gate, targets[0], targets[1], n)
    raise ValueError(f"gate of shape {gate.shape} does not match targets {targets}")


def entangler_pairs(n_qubits: int) -> list[tuple[int, int]]:
    """CNOT ring (q -> q+1 mod n). Two qubits share a single CNOT; one qubit has none."""
    if n_qubits == 1:
        return []
    if n_qubits == 2:
        return [(0, 1)]
    return [(q, (q + 1) % n_qubits) for q in range(n_qubits)]


def encoding_angles(features: Array) -> Array:
    return math.pi * np.tanh(features)


def encode(state0: Array, features: Array) -> Array:
    """RY(pi tanh(features_q)) on each qubit q. ``features`` is [..., n_qubits]."""
    n = num_qubits(state0)
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != n:
        raise ValueError(f"expected {n} features per sample, got {features.shape[-1]}")
    angles = encoding_angles(features)
    state = np.broadcast_to(state0, (*angles.shape[:-1], 2 ** n)).astype(np.result_type(state0, float))
    for q in range(n):
        state = _apply_1q(state, ry(angles[..., q]), q, n)
    return state


def ansatz(state: Array, thetas: Array, n_layers: int | None = None) -> Array:
    """Layers of RY(theta[l, q]) on every qubit followed by the CNOT ring.

    ``thetas`` is [L, n] or [S, L, n]; in the second form each of the S angle
    sets acts on its own copy of the state batch and the result is [S, ..., 2**n].
    """
    n = num_qubits(state)
    thetas = np.asarray(thetas, dtype=float)
    if n_layers is None:
        n_layers = thetas.shape[-2] if thetas.ndim >= 2 else 0
    if thetas.shape[-2:] != (n_layers, n) or thetas.ndim > 3:
        raise ValueError(f"thetas have shape {thetas.shape}, expected ([S,] {n_layers}, {n})")
    gate_lead = thetas.shape[:-2] + (1,) * (state.ndim - 1)
    pairs = entangler_pairs(n)
    for layer in range(n_layers):
        for q in range(n):
            gate = ry(thetas[..., layer, q]).reshape(*gate_lead, 2, 2)
            state = _apply_1q(state, gate, q, n)
        for c, t in pairs:
            state = _apply_cnot(state, c, t, n)
    return state


def z_signs(n_qubits: int) -> Array:
    """[2**n, n] table of Z_q eigenvalues (+1 for bit 0, -1 for bit 1)."""
    idx = np.arange(2 ** n_qubits)
    bits = (idx[:, None] >> (n_qubits - 1 - np.arange(n_qubits))[None, :]) & 1
    return 1.0 - 2.0 * bits


def measure(state: Array, observables: Sequence[Array] | None = None) -> Array:
    """Expectations <psi|H_j|psi>. Default observables are Z on each qubit."""
    n = num_qubits(state)
    if observables is None:
        return (np.abs(state) ** 2) @ z_signs(n)
    values = [np.einsum("...i,ij,...j->...", np.conj(state), H, state).real for H in observables]
    return np.stack(values, axis=-1)


class VqcModel(Approximator):
    """Variational circuit between a fixed random encoder and decoder.

    z = D @ <Z>(ansatz(encode(|0>, E @ [x; t]), thetas)). Only ``thetas`` is
    trainable; ``encoder`` [n_qubits, d+1] and ``decoder`` [d, n_qubits] are
    drawn once from ``adapter_seed`` and never updated. Encoder entries have
    variance 1/(d+1); decoder entries have variance ``decoder_variance``,
    default 1/d, so that E|D m|^2 = |m|^2.
    """

    kind = "vqc"

    def __init__(self, dim: int, n_qubits: int = 4, n_layers: int = 2, seed: int = 0,
                 adapter_seed: int | None = None, decoder_variance: float | None = None):
        super().__init__(dim)
        if n_qubits < 1 or n_layers < 1:
            raise ValueError("n_qubits and n_layers must be >= 1")
        if n_qubits > 20:
            raise ValueError("dense simulation is limited to 20 qubits")
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.seed = seed
        self.adapter_seed = seed + 1 if adapter_seed is None else adapter_seed
        self.decoder_variance = 1.0 / dim if decoder_variance is None else decoder_variance
        adapters = np.random.default_rng(self.adapter_seed)
        self.params["encoder"] = adapters.standard_normal((n_qubits, dim + 1)) / math.sqrt(dim + 1)
        self.params["decoder"] = (adapters.standard_normal((dim, n_qubits))
                                  * math.sqrt(self.decoder_variance))
        self.params["thetas"] = np.random.default_rng(seed).uniform(-math.pi, math.pi,
                                                                    (n_layers, n_qubits))
        self.trainable = ("thetas",)

    @property
    def encoder(self) -> Array:
        return self.params["encoder"]

    @property
    def decoder(self) -> Array:
        return self.params["decoder"]

    @property
    def thetas(self) -> Array:
        return self.params["thetas"]

    def encoded(self, t: Array, x: Array) -> Array:
        features = np.concatenate([x, t[:, None]], axis=1) @ self.encoder.T
        return encode(zero_state(self.n_qubits), features)

    def expectations(self, t: Array, x: Array, thetas: Array | None = None) -> Array:
        """<Z_q> for each sample, [M, n_qubits]."""
        t, x = self._check_inputs(t, x)
        thetas = self.thetas if thetas is None else thetas
        return measure(ansatz(self.encoded(t, x), thetas, self.n_layers))

    def forward(self, t, x):
        return self.expectations(t, x) @ self.decoder.T

    def backward(self, t, x, upstream):
        t, x = self._check_inputs(t, x)
        upstream = self._check_upstream(x, upstream)
        if "thetas" not in self.trainable:
            return {}
        weights = upstream @ self.decoder  # [M, n_qubits]
        n_params = self.thetas.size
        shifts = np.zeros((2 * n_params, n_params))
        shifts[:n_params] = SHIFT * np.eye(n_params)
        shifts[n_params:] = -SHIFT * np.eye(n_params)
        shifted = self.thetas.reshape(1, -1) + shifts
        expect = measure(ansatz(self.encoded(t, x), shifted.reshape(-1, *self.thetas.shape)))
        diff = expect[:n_params] - expect[n_params:]  # [n_params, M, n_qubits]
        grad = np.einsum("pmq,mq->p", diff, weights) / 2
        return {"thetas": grad.reshape(self.thetas.shape)}

    def metadata(self):
        return {**super().metadata(), "n_qubits": self.n_qubits, "n_layers": self.n_layers,
                "seed": self.seed, "adapter_seed": self.adapter_seed,
                "decoder_variance": self.decoder_variance}


def vqc_gradient(model: VqcModel, t: Array, x: Array, upstream: Array) -> Array:
    """Parameter-shift gradient of sum(upstream * model.forward(t, x)) over the angles."""
    return model.backward(t, x, upstream).get("thetas", np.zeros_like(model.thetas))
