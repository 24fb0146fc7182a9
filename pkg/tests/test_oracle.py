import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sector_ed import ground_energy
from impvqe.model import ImpurityModel, preset, qubit_hamiltonian, spin_orbital_integrals
from impvqe.oracle import exact_ground_state, fidelity, lanczos, one_particle_density_matrix, sector_basis
from impvqe.pauli import from_mapping

# frozen from the independent sector ED in tests/sector_ed.py
E_GS = {"e_g": -19.269759368820566, "t_2g": -36.782325078093415}
GAP = {"e_g": 0.3636825811222373, "t_2g": 0.19856782132094253}


def test_minus_z():
    sol = exact_ground_state(from_mapping(1, {"Z": -1.0}))
    assert sol.energy == pytest.approx(-1.0)
    assert abs(sol.vector[0]) == pytest.approx(1.0)


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        exact_ground_state(from_mapping(1, {"X": 1j}))


@pytest.mark.parametrize("name", ["e_g", "t_2g"])
def test_frozen_values_match_independent_ed(name):
    m = preset(name)
    e, gap = ground_energy(*spin_orbital_integrals(m), m.n_e)
    assert e == pytest.approx(E_GS[name], abs=1e-9)
    assert gap == pytest.approx(GAP[name], abs=1e-9)


@pytest.mark.parametrize("name", ["e_g", "t_2g"])
def test_encoded_ground_state(name):
    m = preset(name)
    sol = exact_ground_state(qubit_hamiltonian(m), sector_basis(m.encoding()))
    assert sol.energy == pytest.approx(E_GS[name], abs=1e-9)
    assert sol.gap == pytest.approx(GAP[name], abs=1e-8)
    assert sol.residual < 1e-9 and sol.degeneracy == 1


def test_lanczos_agrees_with_dense():
    m = preset("t_2g")
    h = qubit_hamiltonian(m)
    basis = sector_basis(m.encoding())
    dense = exact_ground_state(h, basis, method="dense")
    it = exact_ground_state(h, basis, method="lanczos")
    assert it.energy == pytest.approx(dense.energy, abs=1e-8)
    assert fidelity(it.vector, dense.vector) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=50)
@given(st.integers(4, 40), st.integers(0, 10 ** 6))
def test_lanczos_random_symmetric(dim, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(dim, dim))
    A = A + A.T
    evals, vecs = lanczos(lambda v: A @ v, rng.normal(size=dim) + 0j, k=2)
    assert evals[0] == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-8)


def test_noninteracting_limit():
    # V = 0: ground energy is the sum of the filled one-body levels
    m = ImpurityModel(M=2, eps=-1.0, lam=0.4, delta=-0.5, U=0.0, J=0.0)
    from impvqe.model import one_body_spatial

    levels = np.linalg.eigvalsh(one_body_spatial(m))
    sol = exact_ground_state(qubit_hamiltonian(m), sector_basis(m.encoding()))
    assert sol.energy == pytest.approx(2 * levels[:2].sum(), abs=1e-10)


def test_sector_basis_size():
    assert len(sector_basis(preset("e_g").encoding())) == 36
    assert len(sector_basis(preset("t_2g").encoding())) == 400


def test_fidelity_basic():
    a = np.array([1, 0], dtype=complex)
    b = np.array([0, 1], dtype=complex)
    assert fidelity(a, a) == 1 and fidelity(a, b) == 0
    assert fidelity(np.outer(a, a), a) == 1
    with pytest.raises(ValueError):
        fidelity(a, np.ones(4))


def test_density_matrix_product_state(eg):
    D = one_particle_density_matrix(eg.psi0, eg.spec)
    assert np.allclose(np.diag(D).real, [1, 1, 0, 0, 1, 1, 0, 0])


def test_density_matrix_ground_state(eg):
    D = one_particle_density_matrix(eg.exact.vector, eg.spec)
    assert np.allclose(D, D.conj().T)
    assert np.trace(D).real == pytest.approx(4.0)
    w = np.linalg.eigvalsh(D)
    assert w.min() > -1e-10 and w.max() < 1 + 1e-10
