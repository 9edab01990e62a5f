import math
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqc_bsde.quantum import (CNOT, PAULI_Z, VqcModel, ansatz, apply_gate, encode,
                              entangler_pairs, measure, rx, ry, rz, vqc_gradient, zero_state)

from oracles import dense_1q, dense_cnot, dense_forward, ry_matrix


# --- gates and state updates ----------------------------------------------------------

class TestGates:
    def test_ry_pi_flips(self):
        psi = apply_gate(zero_state(1), ry(math.pi), [0])
        assert abs(psi[1]) == pytest.approx(1.0, abs=1e-15)
        assert measure(psi)[0] == pytest.approx(-1.0, abs=1e-15)

    def test_ry_half_pi_superposition(self):
        psi = apply_gate(zero_state(1), ry(math.pi / 2), [0])
        assert abs(measure(psi)[0]) <= 1e-12

    def test_cnot_truth_table(self):
        psi = np.zeros(4)
        psi[0b10] = 1.0
        out = apply_gate(psi, CNOT, [0, 1])
        assert out[0b11] == 1.0 and np.sum(out ** 2) == 1.0

    @pytest.mark.parametrize("builder", [rx, ry, rz])
    @given(theta=st.floats(-10, 10))
    def test_rotations_unitary(self, builder, theta):
        U = builder(theta)
        assert np.max(np.abs(U.conj().T @ U - np.eye(2))) <= 1e-12

    @given(n=st.integers(1, 3), data=st.data())
    def test_embedded_unitaries(self, n, data):
        theta = data.draw(st.floats(-math.pi, math.pi))
        q = data.draw(st.integers(0, n - 1))
        U = np.stack([apply_gate(col, ry(theta), [q]) for col in np.eye(2 ** n)], axis=1)
        assert np.max(np.abs(U.T @ U - np.eye(2 ** n))) <= 1e-12
        np.testing.assert_allclose(U, dense_1q(ry_matrix(theta), q, n), atol=1e-15)
        if n >= 2:
            c, t = data.draw(st.permutations(range(n)))[:2]
            C = np.stack([apply_gate(col, CNOT, [c, t]) for col in np.eye(2 ** n)], axis=1)
            np.testing.assert_array_equal(C, dense_cnot(c, t, n))

    @given(st.integers(1, 3), st.lists(st.floats(-7, 7), min_size=1, max_size=12))
    def test_norm_preserved(self, n, angles):
        psi = zero_state(n).astype(complex)
        for k, a in enumerate(angles):
            gate = (rx, ry, rz)[k % 3](a)
            psi = apply_gate(psi, gate, [k % n])
            if n > 1:
                psi = apply_gate(psi, CNOT, [k % n, (k + 1) % n])
            assert abs(np.sum(np.abs(psi) ** 2) - 1.0) <= 1e-12

    def test_bad_targets(self):
        with pytest.raises(IndexError):
            apply_gate(zero_state(2), ry(0.1), [2])
        with pytest.raises(ValueError):
            apply_gate(zero_state(2), CNOT, [1, 1])

    def test_entangler_topology(self):
        assert entangler_pairs(1) == []
        assert entangler_pairs(2) == [(0, 1)]
        assert entangler_pairs(4) == [(0, 1), (1, 2), (2, 3), (3, 0)]


class TestStages:
    def test_zero_features(self):
        psi = encode(zero_state(3), np.zeros(3))
        assert psi[0] == 1.0
        np.testing.assert_array_equal(measure(psi), [1.0, 1.0, 1.0])

    @pytest.mark.parametrize("f", [-2.0, 0.5, 3.0])
    def test_single_qubit_encoding(self, f):
        z = measure(encode(zero_state(1), np.array([f])))[0]
        assert z == pytest.approx(math.cos(math.pi * math.tanh(f)), abs=1e-14)

    def test_identity_ansatz(self):
        psi = ansatz(zero_state(3), np.zeros((2, 3)))
        np.testing.assert_array_equal(psi, zero_state(3))

    def test_single_qubit_ansatz(self):
        assert abs(measure(ansatz(zero_state(1), np.array([[math.pi / 2]])))[0]) <= 1e-15

    def test_two_qubit_flip_then_cnot(self):
        psi = ansatz(zero_state(2), np.array([[math.pi, 0.0]]))
        np.testing.assert_allclose(measure(psi), [-1.0, -1.0], atol=1e-15)

    def test_measure_basis_states(self):
        np.testing.assert_array_equal(measure(zero_state(2)), [1.0, 1.0])
        np.testing.assert_array_equal(measure(np.array([0.0, 1.0])), [-1.0])
        np.testing.assert_allclose(measure(np.array([1.0, 1.0]) / math.sqrt(2)), [0.0],
                                   atol=1e-12)

    def test_explicit_observable(self):
        psi = encode(zero_state(2), np.array([0.3, -0.8]))
        explicit = measure(psi, [dense_1q(PAULI_Z, q, 2) for q in range(2)])
        np.testing.assert_allclose(explicit, measure(psi), atol=1e-15)

    @given(st.integers(1, 3), st.integers(1, 2), st.integers(0, 2 ** 31))
    def test_expectations_bounded(self, n, L, seed):
        rng = np.random.default_rng(seed)
        psi = ansatz(encode(zero_state(n), rng.normal(size=(5, n))),
                     rng.uniform(-4, 4, (L, n)))
        z = measure(psi)
        assert np.all(np.abs(z) <= 1 + 1e-12)


class TestModel:
    def test_zero_decoder(self):
        m = VqcModel(3, 2, 2, seed=1)
        m.params["decoder"][:] = 0
        assert np.all(m.forward(np.array([0.2]), np.ones((1, 3))) == 0)

    def test_zero_encoder_and_angles(self):
        m = VqcModel(3, 2, 1, seed=1)
        m.params["encoder"][:] = 0
        m.params["thetas"][:] = 0
        np.testing.assert_allclose(m.forward(np.array([0.7]), np.ones((1, 3))),
                                   (m.decoder @ np.ones(2))[None, :], rtol=1e-15)

    @given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 4), st.integers(0, 2 ** 31))
    def test_matches_dense_oracle(self, n, L, d, seed):
        rng = np.random.default_rng(seed)
        m = VqcModel(d, n, L, seed=seed % 1000)
        t, x = rng.uniform(0, 1, 4), rng.normal(size=(4, d))
        np.testing.assert_allclose(m.forward(t, x), dense_forward(m, t, x), atol=1e-12)

    def test_fixed_two_qubit_two_layer_oracle(self):
        m = VqcModel(2, 2, 2, seed=42, adapter_seed=7)
        t, x = np.array([0.0, 0.5, 1.0]), np.array([[0.1, -0.3], [1.2, 0.4], [-2.0, 0.0]])
        np.testing.assert_allclose(m.forward(t, x), dense_forward(m, t, x), atol=1e-13)

    def test_shift_rule_cosine(self):
        m = VqcModel(1, 1, 1)
        m.params["encoder"][:] = 0
        m.params["decoder"][:] = 1
        for theta, expected in [(0.0, 0.0), (math.pi / 2, -1.0)]:
            m.params["thetas"][:] = theta
            g = vqc_gradient(m, np.array([0.0]), np.zeros((1, 1)), np.ones((1, 1)))
            assert g[0, 0] == pytest.approx(expected, abs=1e-15)

    @given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 3), st.integers(0, 2 ** 31))
    def test_shift_rule_matches_finite_differences(self, n, L, d, seed):
        rng = np.random.default_rng(seed)
        m = VqcModel(d, n, L, seed=seed % 997)
        t, x = rng.uniform(0, 1, 3), rng.normal(size=(3, d))
        up = rng.normal(size=(3, d))
        g = vqc_gradient(m, t, x, up)
        h = 1e-5
        fd = np.empty_like(g)
        for idx in np.ndindex(g.shape):
            keep = m.thetas[idx]
            m.params["thetas"][idx] = keep + h
            a = np.sum(up * m.forward(t, x))
            m.params["thetas"][idx] = keep - h
            b = np.sum(up * m.forward(t, x))
            m.params["thetas"][idx] = keep
            fd[idx] = (a - b) / (2 * h)
        assert np.max(np.abs(g - fd)) <= 1e-6

    def test_only_angles_trainable(self):
        m = VqcModel(3, 2, 2)
        grads = m.backward(np.array([0.1]), np.ones((1, 3)), np.ones((1, 3)))
        assert set(grads) == {"thetas"} and m.trainable == ("thetas",)

    def test_adapter_statistics(self):
        m = VqcModel(200, 16, 1, seed=0)
        assert m.encoder.shape == (16, 201) and m.decoder.shape == (200, 16)
        assert m.encoder.var() == pytest.approx(1 / 201, rel=0.05)
        assert m.decoder.var() == pytest.approx(1 / 200, rel=0.05)
        assert VqcModel(5, 2, 1, decoder_variance=0.25).decoder_variance == 0.25

    def test_adapters_depend_on_adapter_seed_only(self):
        a, b = VqcModel(3, 2, 2, seed=1, adapter_seed=5), VqcModel(3, 2, 2, seed=2, adapter_seed=5)
        assert np.array_equal(a.encoder, b.encoder) and np.array_equal(a.decoder, b.decoder)
        assert not np.array_equal(a.thetas, b.thetas)

    def test_gradient_shape_mismatch(self):
        with pytest.raises(ValueError):
            VqcModel(3, 2, 1).backward(np.array([0.1]), np.ones((1, 3)), np.ones((1, 2)))
