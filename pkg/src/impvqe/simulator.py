"""Statevector and density-matrix simulation of Pauli-rotation circuits.

States are plain numpy arrays: a 1-D complex vector is a statevector, a
2-D array is a density matrix.  Basis index bit ``q`` is qubit ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .pauli import PauliTerm, QubitOperator, _phase_vector, weight

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


# ------------------------------------------------------------ Pauli kernels

@lru_cache(maxsize=200_000)
def _pauli_action(n_qubits: int, x: int, z: int) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n_qubits)
    return idx ^ x, _phase_vector(n_qubits, x, z)


def apply_pauli(psi: np.ndarray, p: PauliTerm) -> np.ndarray:
    perm, ph = _pauli_action(p.n_qubits, p.x, p.z)
    return (ph * psi)[perm] * p.coefficient


def apply_pauli_rotation(state: np.ndarray, p: PauliTerm, theta: float) -> np.ndarray:
    """``exp(-i theta P)`` applied to a statevector or density matrix."""
    dim = 1 << p.n_qubits
    if state.shape[0] != dim:
        raise ValueError(f"state dimension {state.shape[0]} does not match {p.n_qubits} qubits")
    if p.phase % 2:
        raise ValueError("rotation generator must be Hermitian")
    c, s = np.cos(theta), np.sin(theta)
    if state.ndim == 1:
        return c * state - 1j * s * apply_pauli(state, p)
    perm, ph = _pauli_action(p.n_qubits, p.x, p.z)
    sign = p.coefficient
    P_rho = (ph[:, None] * state)[perm] * sign
    rho_P = state[:, perm] * ph[None, :] * sign
    P_rho_P = (ph[:, None] * rho_P)[perm] * sign
    return c * c * state + s * s * P_rho_P - 1j * s * c * (P_rho - rho_P)


# ------------------------------------------------------------ observables

@lru_cache(maxsize=64)
def _sparse_cached(n_qubits: int, key: Tuple) -> sp.csr_matrix:
    dim = 1 << n_qubits
    idx = np.arange(dim)
    rows, cols, vals = [], [], []
    for (x, z), c in key:
        rows.append(idx ^ x)
        cols.append(idx)
        vals.append(c * _phase_vector(n_qubits, x, z))
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim))
    return m.tocsr()


def operator_matrix(op: QubitOperator) -> sp.csr_matrix:
    """Sparse matrix of ``op`` (cached on the term content)."""
    key = tuple(sorted((k, complex(c)) for k, c in op.terms.items()))
    if not key:
        return sp.csr_matrix((1 << op.n_qubits,) * 2, dtype=complex)
    return _sparse_cached(op.n_qubits, key)


def expectation(state: np.ndarray, op: QubitOperator) -> float:
    """``<op>`` for a statevector or density matrix; ``op`` must be Hermitian."""
    if not op.is_hermitian():
        raise ValueError("expectation requires a Hermitian operator")
    m = operator_matrix(op)
    if state.ndim == 1:
        val = np.vdot(state, m @ state)
    else:
        val = (m @ state).trace()
    return float(np.real(val))


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def to_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def check_state(state: np.ndarray, tol: float = 1e-9) -> None:
    """Raise if ``state`` violates normalization / density-matrix invariants."""
    if state.ndim == 1:
        if abs(np.vdot(state, state).real - 1) > tol:
            raise ValueError("statevector is not normalized")
        return
    if abs(state.trace() - 1) > tol:
        raise ValueError("density matrix trace is not 1")
    if np.abs(state - state.conj().T).max() > tol:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(state).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")


# ------------------------------------------------------------ gate lists

class Gate(NamedTuple):
    name: str  # "h", "rx", "rz", "cx"
    qubits: Tuple[int, ...]
    angle: float = 0.0

    def matrix(self) -> np.ndarray:
        if self.name == "h":
            return _H
        if self.name == "rx":
            return rx(self.angle)
        if self.name == "rz":
            return rz(self.angle)
        if self.name == "cx":
            return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
        raise ValueError(f"unknown gate {self.name!r}")

    def inverse(self) -> "Gate":
        if self.name in ("rx", "rz"):
            return Gate(self.name, self.qubits, -self.angle)
        return self


@dataclass
class GateList:
    n_qubits: int
    gates: List[Gate] = field(default_factory=list)
    global_phase: float = 0.0

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, g: Gate) -> None:
        if any(not 0 <= q < self.n_qubits for q in g.qubits):
            raise ValueError(f"gate {g} acts outside {self.n_qubits} qubits")

    def append(self, g: Gate) -> None:
        self._check(g)
        self.gates.append(g)

    def extend(self, other: "GateList") -> None:
        for g in other.gates:
            self.append(g)
        self.global_phase += other.global_phase

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.name == "cx")

    def inverse(self) -> "GateList":
        return GateList(self.n_qubits, [g.inverse() for g in reversed(self.gates)], -self.global_phase)


def compile_rotation(p: PauliTerm, theta: float) -> GateList:
    """Standard circuit for ``exp(-i theta P)``: basis change, CNOT ladder, Rz.

    Uses ``2 (weight - 1)`` CNOTs.  The identity string compiles to an
    empty list carrying the global phase ``-theta``.
    """
    n = p.n_qubits
    support = [q for q in range(n) if (p.x >> q) & 1 or (p.z >> q) & 1]
    out = GateList(n)
    if not support:
        out.global_phase = -theta
        return out
    pre: List[Gate] = []
    for q in support:
        letter = p.letter(q)
        if letter == "X":
            pre.append(Gate("h", (q,)))
        elif letter == "Y":
            pre.append(Gate("rx", (q,), np.pi / 2))
    ladder = [Gate("cx", (a, b)) for a, b in zip(support[:-1], support[1:])]
    sign = 1.0 if p.phase == 0 else -1.0
    core = pre + ladder + [Gate("rz", (support[-1],), 2 * theta * sign)]
    for g in core:
        out.append(g)
    for g in reversed(ladder):
        out.append(g)
    for g in reversed(pre):
        out.append(g.inverse())
    return out


def compile_step(generator, theta: float) -> GateList:
    """Compile one ansatz step: a PauliTerm or a list of ``(PauliTerm, weight)``."""
    if isinstance(generator, PauliTerm):
        return compile_rotation(generator, theta)
    terms = list(generator)
    if not terms:
        raise ValueError("empty generator")
    out = GateList(terms[0][0].n_qubits)
    for p, w in terms:
        out.extend(compile_rotation(p, theta * w))
    return out


def rotation_cnot_count(p: PauliTerm) -> int:
    w = weight(p)
    return 2 * (w - 1) if w else 0


# --- gate application

def _apply_1q(state: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    lo = 1 << q
    hi = 1 << (n - q - 1)
    if state.ndim == 1:
        t = state.reshape(hi, 2, lo)
        return np.einsum("ab,ibj->iaj", u, t).reshape(-1)
    t = state.reshape(hi, 2, lo, hi, 2, lo)
    t = np.einsum("ab,ibjklm->iajklm", u, t)
    t = np.einsum("ab,ijklbm->ijklam", u.conj(), t)
    return t.reshape(state.shape)


@lru_cache(maxsize=4096)
def _cx_perm(n: int, c: int, t: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return np.where((idx >> c) & 1, idx ^ (1 << t), idx)


def apply_gate(state: np.ndarray, g: Gate, n: int) -> np.ndarray:
    if g.name == "cx":
        perm = _cx_perm(n, *g.qubits)
        if state.ndim == 1:
            return state[perm]
        return state[perm][:, perm]
    return _apply_1q(state, g.matrix(), g.qubits[0], n)


def run_gates(state: np.ndarray, gates: GateList) -> np.ndarray:
    out = state
    for g in gates:
        out = apply_gate(out, g, gates.n_qubits)
    if gates.global_phase and out.ndim == 1:
        out = out * np.exp(1j * gates.global_phase)
    return out


# ------------------------------------------------------------ noise

def amplitude_damping_kraus(p: float) -> List[np.ndarray]:
    return [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
            np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)]


def dephasing_kraus(p: float) -> List[np.ndarray]:
    return [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
            np.array([[0, 0], [0, np.sqrt(p)]], dtype=complex)]


def superoperator(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor ``S[r, c, R, C]`` with ``rho'[r, c] = sum S[r,c,R,C] rho[R, C]``."""
    return sum(np.einsum("rR,cC->rcRC", k, k.conj()) for k in kraus)


def compose_super(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of ``a`` after ``b``."""
    return np.einsum("rcab,abRC->rcRC", a, b)


def unitary_super(u: np.ndarray) -> np.ndarray:
    return superoperator([u])


def apply_super_1q(rho: np.ndarray, S: np.ndarray, q: int, n: int) -> np.ndarray:
    lo = 1 << q
    hi = 1 << (n - q - 1)
    t = rho.reshape(hi, 2, lo, hi, 2, lo)
    out = np.tensordot(S, t, axes=([2, 3], [1, 4]))  # axes r c i j k l
    return out.transpose(2, 0, 3, 4, 1, 5).reshape(rho.shape)


@dataclass(frozen=True)
class NoiseModel:
    """Amplitude damping then dephasing after every gate.

    Single-qubit gates use rate ``p1`` on their qubit; a CNOT applies both
    channels with rate ``p2`` independently to control and target.
    """

    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        for p in (self.p1, self.p2):
            if not 0.0 <= p <= 1.0:
                raise ValueError("noise rates must lie in [0, 1]")

    def channel(self, p: float) -> np.ndarray:
        return compose_super(superoperator(dephasing_kraus(p)), superoperator(amplitude_damping_kraus(p)))

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0

    def scaled(self, factor: float) -> "NoiseModel":
        return NoiseModel(min(1.0, self.p1 * factor), min(1.0, self.p2 * factor))


class NoisyExecutor:
    """Applies gates with the noise model to density matrices.

    Gate superoperators (with trailing noise fused in) are cached by gate.
    """

    def __init__(self, noise: NoiseModel, n_qubits: int):
        self.noise = noise
        self.n = n_qubits
        self._s1 = noise.channel(noise.p1)
        self._s2 = noise.channel(noise.p2)
        self._cache: Dict[Gate, np.ndarray] = {}

    def _fused(self, g: Gate) -> np.ndarray:
        s = self._cache.get(g)
        if s is None:
            s = compose_super(self._s1, unitary_super(g.matrix()))
            if len(self._cache) < 20000:
                self._cache[g] = s
        return s

    def apply(self, rho: np.ndarray, g: Gate) -> np.ndarray:
        if g.name == "cx":
            perm = _cx_perm(self.n, *g.qubits)
            rho = rho[perm][:, perm]
            if self.noise.p2:
                for q in g.qubits:
                    rho = apply_super_1q(rho, self._s2, q, self.n)
            return rho
        if self.noise.p1:
            return apply_super_1q(rho, self._fused(g), g.qubits[0], self.n)
        return _apply_1q(rho, g.matrix(), g.qubits[0], self.n)

    def run(self, rho: np.ndarray, gates: Iterable[Gate]) -> np.ndarray:
        for g in gates:
            rho = self.apply(rho, g)
        return rho

    def apply_adjoint(self, obs: np.ndarray, g: Gate) -> np.ndarray:
        """Heisenberg picture: ``Tr[obs E(rho)] = Tr[E*(obs) rho]``."""
        if g.name == "cx":
            if self.noise.p2:
                adj = _adjoint_super(self._s2)
                for q in g.qubits:
                    obs = apply_super_1q(obs, adj, q, self.n)
            perm = _cx_perm(self.n, *g.qubits)
            return obs[perm][:, perm]
        if self.noise.p1:
            return apply_super_1q(obs, _adjoint_super(self._fused(g)), g.qubits[0], self.n)
        return _apply_1q(obs, g.matrix().conj().T, g.qubits[0], self.n)

    def run_adjoint(self, obs: np.ndarray, gates: Sequence[Gate]) -> np.ndarray:
        for g in reversed(list(gates)):
            obs = self.apply_adjoint(obs, g)
        return obs


def _adjoint_super(S: np.ndarray) -> np.ndarray:
    # O'[R, C] = sum_{r, c} conj(S[r, c, R, C]) O[r, c]
    return S.conj().transpose(2, 3, 0, 1)


def evolve_noisy(rho: np.ndarray, gates: GateList, noise: NoiseModel) -> np.ndarray:
    """Run ``gates`` on density matrix ``rho`` with noise after every gate."""
    if rho.ndim != 2:
        raise ValueError("evolve_noisy needs a density matrix")
    if abs(np.trace(rho) - 1) > 1e-9:
        raise ValueError("input density matrix does not have unit trace")
    return NoisyExecutor(noise, gates.n_qubits).run(rho, gates)


def global_depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    dim = rho.shape[0]
    return (1 - p) * rho + p * np.eye(dim) / dim


# ------------------------------------------------------------ sampling

def probabilities(state: np.ndarray, basis: Optional[GateList] = None) -> np.ndarray:
    if basis is not None and len(basis):
        state = run_gates(state, basis)
    if state.ndim == 1:
        p = np.abs(state) ** 2
    else:
        p = np.clip(np.real(np.diag(state)), 0.0, None)
    return p / p.sum()


def sample_counts(probs: np.ndarray, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts per basis index."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    return rng.multinomial(n_shots, probs)


def sample(state: np.ndarray, basis: Optional[GateList], n_shots: int, seed) -> Dict[str, int]:
    """Histogram ``{bitstring: count}`` (bitstrings leftmost = highest qubit)."""
    rng = np.random.default_rng(seed)
    probs = probabilities(state, basis)
    n = int(np.log2(probs.size))
    counts = sample_counts(probs, n_shots, rng)
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}
