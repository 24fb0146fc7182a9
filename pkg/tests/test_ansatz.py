from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impvqe import ansatz as az, studies
from impvqe.optim import bfgs_minimize
from impvqe.oracle import fidelity
from impvqe.pauli import PauliTerm, count_y


def _fd_grad(a, theta, psi0, h, idx, step=1e-5):
    out = []
    for k in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[k] += step
        tm[k] -= step
        out.append((a.energy(tp, psi0, h) - a.energy(tm, psi0, h)) / (2 * step))
    return np.array(out)


@lru_cache(maxsize=None)
def _hva(layers):
    return az.build_hva(studies.problem().model, layers)


def test_uccsd_counts_and_error(eg_mo):
    a = az.build_uccsd(eg_mo.model)
    assert a.n_parameters == 26
    assert a.cnot_count() == 1096
    r = bfgs_minimize(lambda t: a.energy_and_gradient(t, eg_mo.psi0, eg_mo.h), np.zeros(26))
    de = r.energy - eg_mo.exact.energy
    assert abs(de - 0.029) <= 0.006


def test_hva_four_layers_exact(eg):
    a = _hva(4)
    assert a.n_parameters == 20
    assert a.cnot_count() == 288
    r = bfgs_minimize(lambda t: a.energy_and_gradient(t, eg.psi0, eg.h), np.full(20, az.HVA_INIT))
    assert r.energy - eg.exact.energy < 1e-5


def test_hva_groups_cover_hamiltonian(eg):
    groups = az.hva_groups(eg.model)
    assert len(groups) == 5
    total = groups[0][1]
    for _, q in groups[1:]:
        total = total + q
    diff = (eg.h - total).simplify(1e-10)
    # only the identity offset may remain
    assert all(k == (0, 0) for k in diff.terms)


@pytest.mark.parametrize("layers", [1, 2, 3, 4, 5])
@settings(max_examples=20)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_hva_outer_layer_gradient_vanishes(layers, seed):
    eg = studies.problem()
    # holds only while the state below the outer layer stays real; see the ledger
    a = _hva(layers)
    g = a.n_parameters // layers
    theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, a.n_parameters)
    theta[-g:] = 0.0
    outer = range(a.n_parameters - g, a.n_parameters)
    fd = _fd_grad(a, theta, eg.psi0, eg.h, outer)
    assert float(np.max(np.abs(fd))) < 1e-8


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_real_state_kills_real_generator_gradient(seed):
    eg = studies.problem()
    # odd-Y rotations keep the state real; a following HVA layer at zero then has no gradient
    rng = np.random.default_rng(seed)
    pub = az.published_eg_ansatz()
    psi = pub.state(rng.uniform(-np.pi, np.pi, pub.n_parameters), eg.psi0)
    assert np.max(np.abs(psi.imag)) < 1e-12
    a = _hva(1)
    fd = _fd_grad(a, np.zeros(a.n_parameters), psi, eg.h, range(a.n_parameters))
    assert float(np.max(np.abs(fd))) < 1e-8


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1))
def test_adjoint_gradient_matches_finite_differences(eg, seed):
    a = az.published_eg_ansatz()
    theta = np.random.default_rng(seed).uniform(-1, 1, a.n_parameters)
    _, grad = a.energy_and_gradient(theta, eg.psi0, eg.h)
    fd = _fd_grad(a, theta, eg.psi0, eg.h, range(a.n_parameters))
    assert np.allclose(grad, fd, atol=1e-7)


def test_state_matches_compiled_gates(eg):
    from impvqe.simulator import run_gates
    a = az.published_eg_ansatz()
    theta = np.linspace(-1, 1, a.n_parameters)
    psi = a.state(theta, eg.psi0)
    out = run_gates(eg.psi0, a.gates(theta))
    assert fidelity(psi, out) == pytest.approx(1.0, abs=1e-12)


def test_pool_sizes(eg):
    hc = az.pool_hc(eg.h)
    stripped = az.strip_z(hc)
    assert len(az.pool_uccsd(eg.model)) == 152
    assert len(hc) == 56
    assert len(stripped) == 16
    mcp = az.pool_mcp(stripped)
    assert len(mcp) == 2 * (eg.spec.n_qubits - 1) == 10
    assert {p.key for p in mcp} <= {p.key for p in stripped}


@pytest.mark.parametrize("which", ["uccsd", "hc", "z_stripped", "mcp", "succspd"])
def test_pool_members_unique_odd_y(eg, which):
    from impvqe.studies import pool
    p = pool(which, eg)
    keys = [x.key for x in p]
    assert len(set(keys)) == len(keys)
    assert all(count_y(x) % 2 == 1 for x in p)


def test_pool_rejects_even_y_and_duplicates():
    xy = PauliTerm.from_string("XY")
    with pytest.raises(ValueError):
        az.OperatorPool("bad", (PauliTerm.from_string("XX"),))
    with pytest.raises(ValueError):
        az.OperatorPool("bad", (xy, xy))


def test_step_rejects_noncommuting_generator():
    with pytest.raises(ValueError):
        az.Step(((PauliTerm.from_string("XY"), 1.0), (PauliTerm.from_string("YY"), 1.0)), 0)


def test_manifest_roundtrip(eg):
    a = az.build_hva(eg.model, 2)
    theta = np.linspace(0, 1, a.n_parameters)
    b, t = az.loads(az.dumps(a, theta))
    assert np.array_equal(t, theta)
    assert b.n_parameters == a.n_parameters and b.reference == a.reference
    assert np.allclose(b.state(theta, eg.psi0), a.state(theta, eg.psi0))
    assert b.cnot_count() == a.cnot_count()


def test_manifest_reports_line():
    with pytest.raises(ValueError, match="line 2"):
        az.loads("n_qubits 2\nstep 0 1.0\n")


def test_published_circuit_shape():
    a = az.published_eg_ansatz()
    assert a.n_parameters == 32
    assert a.cnot_count() == 138
    assert a.single_pauli
