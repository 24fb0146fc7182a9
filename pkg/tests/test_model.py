import numpy as np
import pytest
from hypothesis import given, strategies as st

from impvqe.fermion import fermion_dense
from impvqe.model import (ImpurityModel, build_hamiltonian, hartree_fock, kanamori_tensor, mo_hamiltonian,
                          one_body_spatial, preset, qubit_hamiltonian, reference_state, u_sweep)
from impvqe.oracle import fidelity


def test_presets():
    eg, t2g = preset("e_g"), preset("t_2g")
    assert (eg.M, eg.eps, eg.lam, eg.delta, eg.U, eg.J) == (2, -9.8, 0.3, -0.3, 7.0, 2.1)
    assert (t2g.M, t2g.eps, t2g.lam) == (3, -12.7, 0.1)
    assert eg.n_e == 4 and t2g.n_e == 6
    with pytest.raises(ValueError):
        preset("f")


@given(st.floats(0, 10), st.floats(0, 3), st.integers(1, 3))
def test_kanamori_entries(U, J, M):
    V = kanamori_tensor(U, J, M)
    for a in range(M):
        assert V[a, a, a, a] == U
        for b in range(M):
            if a != b:
                assert V[a, a, b, b] == pytest.approx(U - 2 * J)
                assert V[a, b, a, b] == J and V[a, b, b, a] == J
    assert np.allclose(V, V.transpose(2, 3, 0, 1))


def test_one_body_layout():
    h = one_body_spatial(preset("e_g"))
    assert np.allclose(np.diag(h), [-9.8, -9.8, 0.3, 0.3])
    assert h[0, 2] == h[2, 0] == -0.3 and h[0, 3] == 0


def test_hamiltonian_hermitian_and_real():
    h = qubit_hamiltonian(preset("e_g"))
    assert h.n_qubits == 6 and h.is_hermitian() and h.is_real()


def test_single_orbital_atomic_limit():
    # M=1 without hybridization: the doubly occupied level costs 2 eps + U
    m = ImpurityModel(M=1, eps=-1.0, lam=5.0, delta=0.0, U=3.0, J=0.0)
    H = fermion_dense(build_hamiltonian(m))
    both = (1 << m.mode(0, 0)) | (1 << m.mode(0, 1))
    assert H[both, both] == pytest.approx(2 * -1.0 + 3.0)
    single = 1 << m.mode(0, 0)
    assert H[single, single] == pytest.approx(-1.0)


def test_bath_sign_convention():
    m = ImpurityModel(M=1, eps=0.0, lam=0.7, delta=0.0, U=0.0, J=0.0)
    H = fermion_dense(build_hamiltonian(m))
    bath = 1 << m.mode(0, 0, bath=True)
    assert H[bath, bath] == pytest.approx(0.7)
    flipped = fermion_dense(build_hamiltonian(m.with_(bath_sign=-1)))
    assert flipped[bath, bath] == pytest.approx(-0.7)


def test_hartree_fock_orbitals_orthonormal():
    for name in ("e_g", "t_2g"):
        e, C = hartree_fock(preset(name))
        assert np.allclose(C.T @ C, np.eye(C.shape[0]))
        assert np.all(np.diff(e) >= -1e-12)


def test_mo_hamiltonian_same_spectrum():
    m = preset("e_g")
    a = np.linalg.eigvalsh(fermion_dense(build_hamiltonian(m)))
    b = np.linalg.eigvalsh(fermion_dense(mo_hamiltonian(m)))
    assert np.allclose(a, b, atol=1e-9)


def test_reference_fidelities(eg, eg_mo):
    m = eg.model
    # product state, roughly 0.19
    assert fidelity(reference_state("product_I", m), eg.exact.vector) == pytest.approx(0.19, abs=0.03)
    assert fidelity(reference_state("noninteracting_II", m), eg.exact.vector) == pytest.approx(0.2359, abs=1e-3)
    assert fidelity(reference_state("hartree_fock", m), eg_mo.exact.vector) == pytest.approx(0.7580, abs=1e-3)


def test_reference_errors():
    with pytest.raises(ValueError):
        reference_state("vacuum", preset("e_g"))
    with pytest.raises(ValueError):
        reference_state("product_I", preset("e_g").with_(n_e=2))


def test_u_sweep_grid():
    ms = u_sweep()
    assert len(ms) == 16 and ms[0].U == 0.5 and ms[-1].U == 8.0
    for m in ms:
        assert m.J == pytest.approx(0.3 * m.U)
        assert m.eps / m.U == pytest.approx(-9.8 / 7.0)
        assert (m.lam, m.delta) == (0.3, -0.3)
    assert any(m == preset("e_g") for m in ms)
