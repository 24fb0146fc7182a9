import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from impvqe import studies
from impvqe.fermion import encode
from impvqe.measure import (MeasurementGroup, compile_groups, double_factorize, estimate_energy, givens_circuit,
                            givens_decomposition, qwc_groups, reassemble)
from impvqe.simulator import expectation, operator_matrix, probabilities


def _state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="module")
def compiled():
    pb = studies.problem()
    return compile_groups(double_factorize(pb.model), pb.spec)


def test_group_counts(eg):
    assert len(double_factorize(eg.model)) == 3
    assert len(qwc_groups(eg.h)) == 5


def test_qwc_groups_partition_terms(eg):
    groups = qwc_groups(eg.h)
    flat = [p.key for g in groups for p in g]
    terms = [p.key for p, c in eg.h.items() if not p.is_identity() and abs(c) > 1e-12]
    assert sorted(flat) == sorted(terms)


def test_reassembly_dense(eg):
    h2 = reassemble(double_factorize(eg.model), eg.spec)
    assert np.abs(operator_matrix(h2) - operator_matrix(eg.h)).max() < 1e-10


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_grouped_energy_equals_direct(seed):
    pb = studies.problem()
    compiled = compile_groups(double_factorize(pb.model), pb.spec)
    psi = _state(pb.spec.n_qubits, np.random.default_rng(seed))
    est = estimate_energy(psi, compiled)
    assert est.energy == pytest.approx(expectation(psi, pb.h), abs=1e-10)


@settings(max_examples=200)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_givens_decomposition_reconstructs(n, seed):
    U = ortho_group.rvs(n, random_state=seed)
    ops, signs = givens_decomposition(U)
    A = U.copy()
    for mu, nu, th in ops:
        G = np.eye(n)
        c, s = np.cos(th), np.sin(th)
        G[mu, mu] = G[nu, nu] = c
        G[mu, nu], G[nu, mu] = s, -s
        A = G @ A
    assert np.allclose(A, np.diag(signs), atol=1e-10)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1))
def test_givens_circuit_rotates_densities(seed):
    pb = studies.problem()
    rng = np.random.default_rng(seed)
    half = pb.spec.n_modes // 2
    R = ortho_group.rvs(half, random_state=seed)
    n = pb.spec.n_modes
    g = MeasurementGroup("t", n, R, 0.3, rng.normal(size=n), np.triu(rng.normal(size=(n, n)), 1))
    cg = compile_groups([g], pb.spec)[0]
    psi = _state(pb.spec.n_qubits, rng)
    dense = expectation(psi, encode(g.fermion_operator(), pb.spec))
    assert float(probabilities(psi, cg.circuit) @ cg.diagonal) == pytest.approx(dense, abs=1e-10)


def test_givens_rejects_bad_rotation(eg):
    with pytest.raises(ValueError):
        givens_decomposition(np.array([[1.0, 1.0], [0.0, 1.0]]))
    R = np.eye(eg.spec.n_modes)
    R[0, -1] = R[-1, 0] = 1.0
    with pytest.raises(ValueError):
        givens_circuit(R, eg.spec)


def test_shot_statistics(eg, compiled):
    psi = eg.exact.vector
    exact = estimate_energy(psi, compiled).energy
    draws = np.array([estimate_energy(psi, compiled, 1 << 14, seed=s).energy for s in range(200)])
    stderr = estimate_energy(psi, compiled, 1 << 14, seed=0).stderr
    assert abs(draws.mean() - exact) < 4 * stderr / np.sqrt(len(draws))
    assert draws.std(ddof=1) == pytest.approx(stderr, rel=0.2)


def test_variance_halves_with_doubled_shots(eg, compiled):
    psi = studies.problem().psi0
    v1 = np.var([estimate_energy(psi, compiled, 4096, seed=s).energy for s in range(400)], ddof=1)
    v2 = np.var([estimate_energy(psi, compiled, 8192, seed=1000 + s).energy for s in range(400)], ddof=1)
    assert v1 / v2 == pytest.approx(2.0, rel=0.3)


def test_sampling_is_seeded(eg, compiled):
    a = estimate_energy(eg.psi0, compiled, 1000, seed=5)
    b = estimate_energy(eg.psi0, compiled, 1000, seed=5)
    assert a.energy == b.energy
