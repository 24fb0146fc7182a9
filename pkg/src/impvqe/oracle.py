"""Exact diagonalization references: ground states, fidelities, 1-RDMs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fermion import EncodingSpec, FermionOperator, encode, index_to_occupations
from .pauli import QubitOperator
from .simulator import operator_matrix


@dataclass
class ExactSolution:
    energy: float
    vector: np.ndarray
    gap: float
    degeneracy: int
    sector: Optional[tuple] = None
    residual: float = 0.0


def lanczos(matvec, v0: np.ndarray, k: int = 2, max_iter: int = 300, tol: float = 1e-10):
    """Lowest ``k`` eigenpairs with full reorthogonalization.

    Converges on the residual norm of the lowest Ritz pair.
    """
    dim = v0.size
    max_iter = min(max_iter, dim)
    V = np.zeros((max_iter, dim), dtype=complex)
    alpha = np.zeros(max_iter)
    beta = np.zeros(max_iter)
    v = v0 / np.linalg.norm(v0)
    V[0] = v
    m = 0
    for j in range(max_iter):
        w = matvec(V[j])
        alpha[j] = np.real(np.vdot(V[j], w))
        w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j else 0)
        # full reorthogonalization, twice for stability
        for _ in range(2):
            w = w - V[:j + 1].T @ (V[:j + 1].conj() @ w)
        m = j + 1
        T = np.diag(alpha[:m]) + np.diag(beta[:m - 1], 1) + np.diag(beta[:m - 1], -1)
        evals, evecs = np.linalg.eigh(T)
        b = np.linalg.norm(w)
        if abs(b * evecs[-1, 0]) < tol or b < 1e-14 or m == max_iter:
            break
        beta[j] = b
        V[j + 1] = w / b
    vecs = evecs[:, :k].T @ V[:m]
    return evals[:k], vecs


def exact_ground_state(h: QubitOperator, basis: Optional[Sequence[int]] = None,
                       method: str = "auto", tol: float = 1e-9) -> ExactSolution:
    """Lowest eigenpair of ``h``, optionally restricted to basis ``indices``.

    ``method`` is ``dense``, ``lanczos`` or ``auto`` (dense up to 8 qubits).
    """
    if not h.is_hermitian():
        raise ValueError("Hamiltonian must be Hermitian")
    if h.n_qubits > 12:
        raise ValueError("exact diagonalization limited to 12 qubits")
    full = operator_matrix(h)
    dim = 1 << h.n_qubits
    idx = np.arange(dim) if basis is None else np.asarray(basis)
    sub = full[idx][:, idx]
    if method == "auto":
        method = "dense" if h.n_qubits <= 8 else "lanczos"
    if method == "dense":
        evals, evecs = np.linalg.eigh(sub.toarray())
        e0, vec = evals[0], evecs[:, 0]
        gap = evals[1] - evals[0] if evals.size > 1 else np.inf
        degeneracy = int(np.sum(np.abs(evals - e0) < 1e-8))
    else:
        rng = np.random.default_rng(12345)
        v0 = rng.normal(size=idx.size) + 0j
        evals, vecs = lanczos(lambda v: sub @ v, v0, k=2)
        e0, vec = evals[0], vecs[0]
        gap = evals[1] - evals[0] if evals.size > 1 else np.inf
        degeneracy = 1 + int(gap < 1e-8)
    psi = np.zeros(dim, dtype=complex)
    psi[idx] = vec
    psi /= np.linalg.norm(psi)
    # fix the global phase: largest component real positive
    k = np.argmax(np.abs(psi))
    psi *= np.exp(-1j * np.angle(psi[k]))
    residual = float(np.linalg.norm(full @ psi - e0 * psi))
    return ExactSolution(float(e0), psi, float(gap), degeneracy, residual=residual)


def sector_basis(spec: EncodingSpec) -> np.ndarray:
    """Qubit basis indices whose decoded occupations lie in ``spec.sector``."""
    idx = np.arange(1 << spec.n_qubits)
    occ = index_to_occupations(idx, spec)
    half = spec.n_modes // 2
    n_up = occ[:, :half].sum(axis=1)
    n_dn = occ[:, half:].sum(axis=1)
    keep = (n_up == spec.n_up) & (n_dn == spec.n_down)
    return idx[keep]


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|^2``, or ``<b|rho|b>`` when ``a`` is a density matrix."""
    if a.shape[0] != b.shape[0]:
        raise ValueError("dimension mismatch")
    if a.ndim == 2:
        return float(np.real(np.vdot(b, a @ b)))
    return float(abs(np.vdot(a, b)) ** 2)


def one_particle_density_matrix(state: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """``D[p, q] = <c+_p c_q>``; spin-off-diagonal blocks vanish and are left zero."""
    n = spec.n_modes
    half = n // 2
    D = np.zeros((n, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            if (p < half) != (q < half):
                continue
            op = encode(FermionOperator.term(n, [(p, 1), (q, 0)]), spec)
            m = operator_matrix(op)
            if state.ndim == 1:
                D[p, q] = np.vdot(state, m @ state)
            else:
                D[p, q] = (m @ state).trace()
    return D
