"""Brute-force references shared by the unit and acceptance tests."""
import math
from functools import reduce

import numpy as np

I2 = np.eye(2)


# qubit 0 is the most significant bit

def dense_1q(gate, q, n):
    return reduce(np.kron, [gate if k == q else I2 for k in range(n)])


def dense_cnot(c, t, n):
    dim = 2 ** n
    U = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[c]:
            bits[t] ^= 1
        j = sum(b << (n - 1 - k) for k, b in enumerate(bits))
        U[j, i] = 1.0
    return U


def ry_matrix(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]])


def dense_circuit(angles_enc, thetas, n):
    U = np.eye(2 ** n)
    for q in range(n):
        U = dense_1q(ry_matrix(angles_enc[q]), q, n) @ U
    ring = [(0, 1)] if n == 2 else ([] if n == 1 else [(q, (q + 1) % n) for q in range(n)])
    for layer in thetas:
        for q in range(n):
            U = dense_1q(ry_matrix(layer[q]), q, n) @ U
        for c, t in ring:
            U = dense_cnot(c, t, n) @ U
    return U


def dense_forward(model, t, x):
    n = model.n_qubits
    out = []
    for tm, xm in zip(t, x):
        angles = math.pi * np.tanh(model.encoder @ np.append(xm, tm))
        psi = dense_circuit(angles, model.thetas, n)[:, 0]
        z = [psi @ dense_1q(np.diag([1.0, -1.0]), q, n) @ psi for q in range(n)]
        out.append(model.decoder @ np.array(z))
    return np.array(out)
