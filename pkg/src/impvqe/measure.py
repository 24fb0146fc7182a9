"""Measurement reduction and energy estimation.

Each :class:`MeasurementGroup` is an orbital rotation plus a polynomial
of degree <= 2 in the rotated occupation numbers.  Measuring a group
means applying the Givens circuit of its rotation, sampling the
computational basis and evaluating the polynomial on decoded occupations.

Occupations are decoded from reduced-parity bitstrings by undoing the
prefix-parity map with the two dropped parity bits restored from the
sector (:func:`impvqe.fermion.index_to_occupations`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fermion import EncodingSpec, FermionOperator, encode, index_to_occupations
from .model import ImpurityModel, kanamori_tensor, one_body_spatial
from .pauli import PauliTerm, QubitOperator
from .simulator import GateList, compile_rotation, probabilities, run_gates


@dataclass
class MeasurementGroup:
    """``const + sum_p a[p] n_p + sum_{p<q} b[p, q] n_p n_q`` in the rotated basis.

    ``rotation`` is the per-spin orbital matrix ``U`` (columns are new
    orbitals in terms of the old), shared by both spins; ``None`` means
    the identity basis.
    """

    name: str
    n_modes: int
    rotation: Optional[np.ndarray]
    const: float = 0.0
    linear: np.ndarray = field(default=None)
    pair: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.linear is None:
            self.linear = np.zeros(self.n_modes)
        if self.pair is None:
            self.pair = np.zeros((self.n_modes, self.n_modes))
        # keep only the strict upper triangle
        self.pair = np.triu(self.pair + np.tril(self.pair, -1).T, 1)

    def evaluate(self, occ: np.ndarray) -> np.ndarray:
        """Polynomial on occupation rows ``occ[k, p]``."""
        occ = np.atleast_2d(occ).astype(float)
        return self.const + occ @ self.linear + np.einsum("kp,pq,kq->k", occ, self.pair, occ)

    def mode_rotation(self) -> np.ndarray:
        """The spin-orbital rotation (block diagonal over spins)."""
        half = self.n_modes // 2
        u = np.eye(half) if self.rotation is None else self.rotation
        return np.kron(np.eye(2), u)

    def fermion_operator(self) -> FermionOperator:
        """The group observable written back in the original modes."""
        n = self.n_modes
        U = self.mode_rotation()
        dens = [_rotated_number(U, m) for m in range(n)]
        op = FermionOperator.identity(n, self.const)
        for p in range(n):
            if self.linear[p]:
                op = op + dens[p] * self.linear[p]
        for p, q in zip(*np.nonzero(self.pair)):
            op = op + dens[p] * dens[q] * self.pair[p, q]
        return op


def _rotated_number(U: np.ndarray, m: int) -> FermionOperator:
    n = U.shape[0]
    op = FermionOperator(n)
    for a in range(n):
        for b in range(n):
            w = U[a, m] * U[b, m]
            if abs(w) > 1e-14:
                op = op + FermionOperator.term(n, [(a, 1), (b, 0)], w)
    return op


def _spin_pair(n_sp: int, i: int, j: int, coeff: float, pair: np.ndarray) -> None:
    """Add ``coeff * n_i n_j`` summed over both spin combinations."""
    for s in range(2):
        for t in range(2):
            p, q = s * n_sp + i, t * n_sp + j
            if p == q:
                continue  # handled as a linear term by the caller
            pair[min(p, q), max(p, q)] += coeff


def double_factorize(m: ImpurityModel, tol: float = 1e-10) -> List[MeasurementGroup]:
    """Identity-basis density group, hybridization group, one group per
    positive eigenvalue of the non-density Coulomb supermatrix."""
    M, n_sp, n = m.M, m.n_spatial, m.n_modes
    V = kanamori_tensor(m.U, m.J, M)
    h = one_body_spatial(m)
    # H = sum eps~ c+c + 1/2 sum V c+_a c_b c+_c c_d ; eps~ = eps - 1/2 sum_g V_aggb
    eps_t = h.copy()
    eps_t[:M, :M] -= 0.5 * np.einsum("aggb->ab", V)
    if np.abs(eps_t[:M, :M] - np.diag(np.diag(eps_t[:M, :M]))).max() > tol:
        raise ValueError("physical one-body block must be diagonal")
    diag = MeasurementGroup("diagonal", n, None)
    for s in range(2):
        diag.linear[s * n_sp:(s + 1) * n_sp] += np.diag(eps_t)
    Vd = np.zeros_like(V)
    for a in range(M):
        for c in range(M):
            Vd[a, a, c, c] = V[a, a, c, c]
    # 1/2 sum_{a c s t} V_aacc n_as n_ct ; n_as n_as = n_as
    pair = np.zeros((n, n))
    for a in range(M):
        for c in range(M):
            _spin_pair(n_sp, a, c, 0.5 * V[a, a, c, c], pair)
            if a == c:
                for s in range(2):
                    diag.linear[s * n_sp + a] += 0.5 * V[a, a, a, a]
    diag.pair = pair
    diag.__post_init__()
    groups = [diag]

    off = h - np.diag(np.diag(h))
    if np.abs(off).max() > tol:
        w, U = np.linalg.eigh(off)
        g = MeasurementGroup("hybridization", n, U)
        g.linear = np.concatenate([w, w])
        groups.append(g)

    Vx = V - Vd
    sup = Vx.reshape(M * M, M * M)
    if np.abs(sup - sup.T).max() > tol:
        raise ValueError("Coulomb supermatrix is not symmetric")
    lam, vecs = np.linalg.eigh(sup)
    if lam.min() < -tol:
        raise ValueError(f"Coulomb supermatrix not positive semidefinite (min eigenvalue {lam.min():.3g})")
    for l in np.nonzero(lam > tol)[0][::-1]:
        L = (vecs[:, l] * np.sqrt(lam[l])).reshape(M, M)
        if np.abs(L - L.T).max() > tol:
            raise ValueError("factor matrix is not symmetric")
        mu, W = np.linalg.eigh(L)
        U = np.eye(n_sp)
        U[:M, :M] = W
        lam_modes = np.zeros(n_sp)
        lam_modes[:M] = mu
        coeff = np.concatenate([lam_modes, lam_modes])
        g = MeasurementGroup(f"exchange{len(groups) - 1}", n, U)
        # 1/2 (sum_p mu_p n_p)^2 = 1/2 sum mu_p^2 n_p + sum_{p<q} mu_p mu_q n_p n_q
        g.linear = 0.5 * coeff ** 2
        g.pair = 0.5 * np.outer(coeff, coeff)  # folded onto p < q below
        g.__post_init__()
        groups.append(g)
    return groups


# ---------------------------------------------------------------- qubit-wise commuting

def _qwc(a: PauliTerm, b: PauliTerm) -> bool:
    for q in range(a.n_qubits):
        la, lb = a.letter(q), b.letter(q)
        if la != "I" and lb != "I" and la != lb:
            return False
    return True


def qwc_groups(h: QubitOperator) -> List[List[PauliTerm]]:
    """Greedy qubit-wise commuting partition of the non-identity terms.

    Terms are visited by decreasing weight, then label, and placed in the
    first compatible group.
    """
    terms = [p for p, c in h.items() if not p.is_identity() and abs(c) > 1e-12]
    terms.sort(key=lambda p: (-bin(p.x | p.z).count("1"), p.label()))
    groups: List[List[PauliTerm]] = []
    for p in terms:
        for g in groups:
            if all(_qwc(p, r) for r in g):
                g.append(p)
                break
        else:
            groups.append([p])
    return groups


# ---------------------------------------------------------------- Givens circuits

def givens_decomposition(U: np.ndarray, tol: float = 1e-9) -> Tuple[List[Tuple[int, int, float]], np.ndarray]:
    """Rotations ``(mu, nu, theta)`` with ``G_K ... G_1 U = diag(signs)``.

    ``G`` is ``exp(theta K)`` where ``K[mu, nu] = 1``, ``K[nu, mu] = -1``.
    """
    U = np.array(U, dtype=float)
    n = U.shape[0]
    if U.shape != (n, n) or np.abs(U.T @ U - np.eye(n)).max() > tol:
        raise ValueError("rotation must be a real orthogonal matrix")
    ops = []
    A = U.copy()
    for col in range(n):
        for row in range(n - 1, col, -1):
            a, b = A[row - 1, col], A[row, col]
            if abs(b) < 1e-14:
                continue
            # rotate rows (row-1, row) so that A[row, col] -> 0
            theta = np.arctan2(b, a)
            G = _givens(n, row - 1, row, theta)
            A = G @ A
            ops.append((row - 1, row, theta))
    return ops, np.sign(np.diag(A))


def _givens(n: int, mu: int, nu: int, theta: float) -> np.ndarray:
    K = np.zeros((n, n))
    K[mu, nu], K[nu, mu] = 1.0, -1.0
    c, s = np.cos(theta), np.sin(theta)
    G = np.eye(n)
    G[mu, mu] = G[nu, nu] = c
    G[mu, nu], G[nu, mu] = s, -s
    return G


def _hop_strings(spec: EncodingSpec, mu: int, nu: int) -> List[Tuple[PauliTerm, float]]:
    """Weights ``w`` with ``exp(theta (c+_mu c_nu - c+_nu c_mu)) = prod exp(-i theta w P)``."""
    n = spec.n_modes
    k = FermionOperator.term(n, [(mu, 1), (nu, 0)]) - FermionOperator.term(n, [(nu, 1), (mu, 0)])
    q = encode(k, spec)
    out = []
    for p, c in sorted(q.items(), key=lambda pc: pc[0].label()):
        c = complex(c)
        if abs(c) > 1e-12:
            out.append((p, -c.imag))
    return out


def givens_circuit(rotation: np.ndarray, spec: EncodingSpec) -> GateList:
    """Circuit ``W`` with ``W n_m^rot W+ = n_m`` for the spin-orbital rotation.

    ``rotation`` is either per spin (``n_modes/2`` square, applied to both
    spins) or over all spin-orbitals with spin-block structure.
    """
    n = spec.n_modes
    half = n // 2
    R = np.asarray(rotation, dtype=float)
    if R.shape == (half, half):
        R = np.kron(np.eye(2), R)
    if R.shape != (n, n):
        raise ValueError("rotation shape does not match the encoding")
    if np.abs(R[:half, half:]).max() > 1e-12 or np.abs(R[half:, :half]).max() > 1e-12:
        raise ValueError("rotation must not mix spins")
    gates = GateList(spec.n_qubits)
    for block in (0, 1):
        sl = slice(block * half, (block + 1) * half)
        ops, _ = givens_decomposition(R[sl, sl])
        # W = e^{k_K} ... e^{k_1}; the circuit applies k_1 first
        for mu, nu, theta in ops:
            for p, w in _hop_strings(spec, block * half + mu, block * half + nu):
                gates.extend(compile_rotation(p, theta * w))
    return gates


# ---------------------------------------------------------------- estimation

@dataclass
class CompiledGroup:
    group: MeasurementGroup
    circuit: GateList
    diagonal: np.ndarray  # polynomial value per computational basis index


def compile_groups(groups: Sequence[MeasurementGroup], spec: EncodingSpec) -> List[CompiledGroup]:
    idx = np.arange(1 << spec.n_qubits)
    occ = index_to_occupations(idx, spec)
    out = []
    for g in groups:
        circ = GateList(spec.n_qubits) if g.rotation is None else givens_circuit(g.mode_rotation(), spec)
        out.append(CompiledGroup(g, circ, g.evaluate(occ)))
    return out


def reassemble(groups: Sequence[MeasurementGroup], spec: EncodingSpec) -> QubitOperator:
    total = FermionOperator(groups[0].n_modes)
    for g in groups:
        total = total + g.fermion_operator()
    return encode(total, spec)


@dataclass
class Estimate:
    energy: float
    stderr: float
    per_group: List[Dict]


def estimate_energy(state: np.ndarray, compiled: Sequence[CompiledGroup], n_shots: Optional[int] = None,
                    seed=None) -> Estimate:
    """Grouped energy; exact when ``n_shots`` is None, else sampled per group."""
    rng = np.random.default_rng(seed)
    total, var, diag = 0.0, 0.0, []
    for cg in compiled:
        probs = probabilities(state, cg.circuit)
        mean = float(probs @ cg.diagonal)
        if n_shots is None:
            total += mean
            diag.append(dict(name=cg.group.name, energy=mean, stderr=0.0))
            continue
        counts = rng.multinomial(n_shots, probs)
        est = float(counts @ cg.diagonal) / n_shots
        v = float(counts @ cg.diagonal ** 2) / n_shots - est ** 2
        total += est
        var += max(v, 0.0) / n_shots
        diag.append(dict(name=cg.group.name, energy=est, stderr=float(np.sqrt(max(v, 0.0) / n_shots)),
                         counts=counts))
    return Estimate(total, float(np.sqrt(var)), diag)


def rotated_state(state: np.ndarray, cg: CompiledGroup) -> np.ndarray:
    return run_gates(state, cg.circuit)
