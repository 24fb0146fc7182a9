import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import ORACLE_CASES
from impvqe.pauli import PauliTerm, from_mapping
from impvqe.simulator import (Gate, GateList, NoiseModel, NoisyExecutor, amplitude_damping_kraus, apply_pauli,
                              apply_pauli_rotation, compile_rotation, dephasing_kraus, evolve_noisy, expectation,
                              global_depolarize, probabilities, rotation_cnot_count, run_gates, sample,
                              superoperator, to_density)

labels = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def _random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


@settings(max_examples=ORACLE_CASES)
@given(labels, st.floats(-np.pi, np.pi), st.integers(0, 2 ** 32 - 1))
def test_rotation_circuit_matches_expm(label, theta, seed):
    p = PauliTerm.from_string(label)
    n = p.n_qubits
    psi = _random_state(n, np.random.default_rng(seed))
    ref = expm(-1j * theta * p.to_matrix()) @ psi
    assert np.allclose(run_gates(psi, compile_rotation(p, theta)), ref)
    assert np.allclose(apply_pauli_rotation(psi, p, theta), ref)


@given(labels)
def test_cnot_count_formula(label):
    p = PauliTerm.from_string(label)
    w = sum(c != "I" for c in label)
    assert compile_rotation(p, 0.3).cnot_count == rotation_cnot_count(p) == (2 * (w - 1) if w else 0)


@given(labels, st.integers(0, 2 ** 32 - 1))
def test_apply_pauli(label, seed):
    p = PauliTerm.from_string(label)
    psi = _random_state(p.n_qubits, np.random.default_rng(seed))
    assert np.allclose(apply_pauli(psi, p), p.to_matrix() @ psi)


def test_gate_range_checked():
    with pytest.raises(ValueError):
        GateList(2, [Gate("cx", (0, 2))])


def test_inverse_list(rng):
    g = compile_rotation(PauliTerm.from_string("XYZ"), 0.7)
    psi = _random_state(3, rng)
    assert np.allclose(run_gates(run_gates(psi, g), g.inverse()), psi)


@pytest.mark.parametrize("kraus", [amplitude_damping_kraus(0.2), dephasing_kraus(0.3)])
def test_channels_trace_preserving(kraus):
    assert np.allclose(sum(k.conj().T @ k for k in kraus), np.eye(2))


def test_amplitude_damping_decays_excited_state():
    S = superoperator(amplitude_damping_kraus(0.25))
    rho = np.einsum("rcRC,RC->rc", S, np.diag([0, 1]).astype(complex))
    assert np.allclose(rho, np.diag([0.25, 0.75]))


def test_noiseless_density_matches_statevector(rng):
    gates = GateList(3)
    for lab, t in (("XYZ", 0.3), ("IZX", -0.8), ("YII", 0.2)):
        gates.extend(compile_rotation(PauliTerm.from_string(lab), t))
    psi = _random_state(3, rng)
    rho = evolve_noisy(to_density(psi), gates, NoiseModel())
    out = run_gates(psi, gates)
    assert np.allclose(rho, np.outer(out, out.conj()))


def test_noise_keeps_density_matrix_valid(rng):
    gates = compile_rotation(PauliTerm.from_string("XYZX"), 0.4)
    rho = evolve_noisy(to_density(_random_state(4, rng)), gates, NoiseModel(0.05, 0.1))
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_noisy_state_loses_purity(rng):
    gates = compile_rotation(PauliTerm.from_string("XYZX"), 0.4)
    rho = evolve_noisy(to_density(_random_state(4, rng)), gates, NoiseModel(1e-3, 1e-2))
    assert np.trace(rho @ rho).real < 1 - 1e-3


@settings(max_examples=40)
@given(labels, st.floats(-2, 2), st.integers(0, 2 ** 32 - 1))
def test_heisenberg_adjoint(label, theta, seed):
    p = PauliTerm.from_string(label)
    n = p.n_qubits
    rng = np.random.default_rng(seed)
    exe = NoisyExecutor(NoiseModel(0.03, 0.07), n)
    gates = compile_rotation(p, theta)
    rho = to_density(_random_state(n, rng))
    A = rng.normal(size=(1 << n, 1 << n))
    O = A + A.T
    lhs = np.trace(O @ exe.run(rho, gates))
    rhs = np.trace(exe.run_adjoint(O.astype(complex), gates) @ rho)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_noise_rates_validated():
    with pytest.raises(ValueError):
        NoiseModel(-0.1, 0.0)


def test_global_depolarizing_argmin_invariance():
    # noise that only rescales the landscape leaves the minimizer in place
    h = from_mapping(2, {"ZI": 0.7, "XX": -0.4, "IZ": 0.2, "YY": 0.3})
    p = PauliTerm.from_string("XY")
    psi0 = np.zeros(4, dtype=complex)
    psi0[0] = 1
    grid = np.arange(-32, 32) * np.pi / 64
    clean, noisy = [], []
    H = h.to_matrix()
    for t in grid:
        psi = apply_pauli_rotation(psi0, p, t)
        rho = global_depolarize(to_density(psi), 0.3)
        clean.append(expectation(psi, h))
        noisy.append(np.trace(H @ rho).real)
    assert np.argmin(clean) == np.argmin(noisy)


def test_sampling_deterministic_and_normalized(rng):
    psi = _random_state(3, rng)
    a = sample(psi, None, 1000, seed=5)
    assert a == sample(psi, None, 1000, seed=5)
    assert sum(a.values()) == 1000
    p = probabilities(psi)
    assert p.sum() == pytest.approx(1.0)
