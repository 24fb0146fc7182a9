"""Multi-orbital impurity models with Kanamori interactions.

An ``(M, M)`` model has ``M`` degenerate correlated orbitals, each
hybridized with one bath orbital.  Spin-orbitals follow the spin-block
layout of :mod:`impvqe.fermion`: within each spin block the physical
orbitals come first, then the bath orbitals.

Energies are in units of the half bandwidth of the lattice model.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace
from importlib import resources
from typing import List, Tuple

import numpy as np

from .fermion import (EncodingSpec, FermionOperator, encode, from_integrals, product_state,
                      restricted_scf, rotate_integrals, slater_determinant)
from .pauli import QubitOperator


@dataclass(frozen=True)
class ImpurityModel:
    """Parameters of the embedding Hamiltonian.

    ``eps`` is the physical orbital level of the two-body form
    ``1/2 sum V c+ c+ c c`` (chemical potential included), ``lam`` the bath
    level, ``delta`` the hybridization.  ``bath_sign`` selects the sign of
    the bath term: ``+1`` gives ``+lam * n_f``.
    """

    M: int
    eps: float
    lam: float
    delta: float
    U: float
    J: float
    n_e: int | None = None
    two_sz: int = 0
    bath_sign: int = 1

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.n_e is None:
            object.__setattr__(self, "n_e", 2 * self.M)

    @property
    def n_spatial(self) -> int:
        return 2 * self.M

    @property
    def n_modes(self) -> int:
        return 4 * self.M

    def mode(self, orbital: int, spin: int, bath: bool = False) -> int:
        """Spin-orbital index of physical (or bath) orbital ``orbital``."""
        return spin * self.n_spatial + (self.M if bath else 0) + orbital

    def encoding(self, kind: str = "parity_reduced") -> EncodingSpec:
        return EncodingSpec(kind=kind, n_modes=self.n_modes, sector=(self.n_e, self.two_sz))

    def with_(self, **changes) -> "ImpurityModel":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "e_g": dict(M=2, eps=-9.8, lam=0.3, delta=-0.3, U=7.0, J=2.1),
    "t_2g": dict(M=3, eps=-12.7, lam=0.1, delta=-0.3, U=7.0, J=2.1),
}


def preset(name: str) -> ImpurityModel:
    """The e_g (M=2) and t_2g (M=3) models; J/U = 0.3 with U = 7."""
    try:
        return ImpurityModel(**PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def kanamori_tensor(U: float, J: float, M: int) -> np.ndarray:
    """Spatial Coulomb tensor ``V[a, b, c, d]`` (pairs (a,b) and (c,d) share a spin)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    V = np.zeros((M, M, M, M))
    for a in range(M):
        V[a, a, a, a] = U
        for b in range(M):
            if a != b:
                V[a, a, b, b] = U - 2 * J
                V[a, b, a, b] = J
                V[a, b, b, a] = J
    return V


def one_body_spatial(m: ImpurityModel) -> np.ndarray:
    """Per-spin one-body matrix over (physical, bath) spatial orbitals."""
    M = m.M
    h = np.zeros((2 * M, 2 * M))
    h[:M, :M] = m.eps * np.eye(M)
    h[M:, M:] = m.bath_sign * m.lam * np.eye(M)
    h[:M, M:] = m.delta * np.eye(M)
    h[M:, :M] = m.delta * np.eye(M)
    return h


def spin_orbital_integrals(m: ImpurityModel) -> Tuple[np.ndarray, np.ndarray]:
    """``(h1, g)`` over spin-orbitals such that
    ``H = sum h1[p,q] c+_p c_q + 1/2 sum g[p,q,r,s] c+_p c+_r c_s c_q``."""
    n_sp = m.n_spatial
    n = m.n_modes
    h_sp = one_body_spatial(m)
    h1 = np.kron(np.eye(2), h_sp)
    V = kanamori_tensor(m.U, m.J, m.M)
    g_sp = np.zeros((n_sp,) * 4)
    g_sp[:m.M, :m.M, :m.M, :m.M] = V
    g = np.zeros((n,) * 4)
    for s1 in range(2):
        for s2 in range(2):
            o1, o2 = s1 * n_sp, s2 * n_sp
            g[o1:o1 + n_sp, o1:o1 + n_sp, o2:o2 + n_sp, o2:o2 + n_sp] = g_sp
    return h1, g


def build_hamiltonian(m: ImpurityModel) -> FermionOperator:
    h1, g = spin_orbital_integrals(m)
    return from_integrals(h1, g)


def qubit_hamiltonian(m: ImpurityModel, kind: str = "parity_reduced") -> QubitOperator:
    return encode(build_hamiltonian(m), m.encoding(kind))


def hartree_fock(m: ImpurityModel) -> Tuple[np.ndarray, np.ndarray]:
    """Restricted SCF orbitals ``(energies, C)``; MO ``k`` is column ``C[:, k]``."""
    if m.n_e % 2 or m.two_sz:
        raise ValueError("restricted Hartree-Fock needs a closed-shell sector")
    V = kanamori_tensor(m.U, m.J, m.M)
    g_sp = np.zeros((m.n_spatial,) * 4)
    g_sp[:m.M, :m.M, :m.M, :m.M] = V
    # stronger damping for the larger models, which oscillate at 0.5
    for mixing in (0.5, 0.3, 0.1):
        energies, C, converged = restricted_scf(one_body_spatial(m), g_sp, m.n_e // 2, mixing=mixing)
        if converged:
            return energies, C
    raise RuntimeError("SCF did not converge")


def mo_hamiltonian(m: ImpurityModel) -> FermionOperator:
    """The Hamiltonian in the Hartree-Fock orbital basis (same spin-block layout)."""
    _, C = hartree_fock(m)
    h1, g = spin_orbital_integrals(m)
    Cs = np.kron(np.eye(2), C)
    return from_integrals(*rotate_integrals(h1, g, Cs))


def mo_qubit_hamiltonian(m: ImpurityModel, kind: str = "parity_reduced") -> QubitOperator:
    return encode(mo_hamiltonian(m), m.encoding(kind))


REFERENCES = ("product_I", "noninteracting_II", "hartree_fock")


def reference_state(kind: str, m: ImpurityModel, spec: EncodingSpec | None = None) -> np.ndarray:
    """Initial statevectors.

    ``product_I``: physical orbitals doubly occupied, bath empty.
    ``noninteracting_II``: ground state of the one-body part.
    ``hartree_fock``: lowest MOs filled; only meaningful with :func:`mo_hamiltonian`.
    """
    spec = spec or m.encoding()
    if kind == "product_I":
        if m.n_e != 2 * m.M or m.two_sz:
            raise ValueError("product_I needs N_e = 2M and S_z = 0")
        occ = [0] * m.n_modes
        for a in range(m.M):
            occ[m.mode(a, 0)] = occ[m.mode(a, 1)] = 1
        return product_state(occ, spec)
    n_up, n_dn = (m.n_e + m.two_sz) // 2, (m.n_e - m.two_sz) // 2
    if kind == "noninteracting_II":
        _, C = np.linalg.eigh(one_body_spatial(m))
        return slater_determinant(C[:, :n_up], C[:, :n_dn], spec)
    if kind == "hartree_fock":
        occ = [0] * m.n_modes
        for k in range(n_up):
            occ[k] = 1
        for k in range(n_dn):
            occ[m.n_spatial + k] = 1
        return product_state(occ, spec)
    raise ValueError(f"unknown reference {kind!r}; choose from {REFERENCES}")


def mean_field_shifted_eps(m: ImpurityModel) -> float:
    """``eps - 1/2 sum_c V[a, c, c, a]``: the level in the density-density form."""
    V = kanamori_tensor(m.U, m.J, m.M)
    return m.eps - 0.5 * float(np.einsum("acca->a", V)[0])


def u_sweep(base: str = "e_g", start: float = 0.5, stop: float = 8.0, step: float = 0.5) -> List[ImpurityModel]:
    """Models for a Hubbard-U sweep at fixed J/U.

    Per-U embedding parameters are read from the bundled table when
    present.  Otherwise the bath parameters stay at the base preset and
    ``eps`` scales with ``U``, so the impurity level keeps its position
    relative to the interaction (a fixed ``eps`` tuned for large ``U``
    leaves the impurity trivially filled at small ``U``).
    """
    table = _load_sweep_table()
    base_model = preset(base)
    ratio = base_model.J / base_model.U
    out = []
    for U in np.arange(start, stop + 1e-9, step):
        U = round(float(U), 10)
        row = table.get((base, U))
        if row is not None:
            out.append(base_model.with_(U=U, J=ratio * U, **row))
        else:
            out.append(base_model.with_(U=U, J=round(ratio * U, 12), eps=base_model.eps * U / base_model.U))
    return out


def _load_sweep_table() -> dict:
    table = {}
    try:
        text = resources.files("impvqe.data").joinpath("u_sweep.csv").read_text()
    except (FileNotFoundError, ModuleNotFoundError):
        return table
    for row in csv.DictReader(line for line in text.splitlines() if not line.startswith("#")):
        key = (row["preset"], float(row["U"]))
        table[key] = {k: float(row[k]) for k in ("eps", "lam", "delta") if row.get(k)}
    return table
