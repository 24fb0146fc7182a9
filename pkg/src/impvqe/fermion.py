"""Second-quantized operators and their qubit encodings.

Spin-orbitals are laid out in spin blocks: all spin-up modes first, then
all spin-down modes, in the same spatial order.  For the impurity models
the spatial order is physical orbitals then bath orbitals.  This layout is
what the two-qubit parity reduction needs: the last qubit of the up block
holds the spin-up parity and the last qubit overall holds the total
parity, and both are fixed inside an (N_e, S_z) sector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .pauli import PauliTerm, QubitOperator

Ladder = Tuple[int, int]  # (mode, 1 for creation / 0 for annihilation)
Product = Tuple[Ladder, ...]


@dataclass
class FermionOperator:
    """Sum of products of ladder operators with real (or complex) weights."""

    n_modes: int
    terms: Dict[Product, complex] = field(default_factory=dict)

    @classmethod
    def term(cls, n_modes: int, product: Iterable[Ladder], coeff: complex = 1.0) -> "FermionOperator":
        product = tuple((int(m), int(d)) for m, d in product)
        for m, _ in product:
            if not 0 <= m < n_modes:
                raise ValueError(f"mode {m} out of range for {n_modes} modes")
        return cls(n_modes, {product: coeff})

    @classmethod
    def identity(cls, n_modes: int, coeff: complex = 1.0) -> "FermionOperator":
        return cls(n_modes, {(): coeff})

    def copy(self) -> "FermionOperator":
        return FermionOperator(self.n_modes, dict(self.terms))

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        out = self.copy()
        for k, c in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + c
        return out

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, FermionOperator):
            out: Dict[Product, complex] = {}
            for k1, c1 in self.terms.items():
                for k2, c2 in other.terms.items():
                    out[k1 + k2] = out.get(k1 + k2, 0.0) + c1 * c2
            return FermionOperator(max(self.n_modes, other.n_modes), out)
        return FermionOperator(self.n_modes, {k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "FermionOperator":
        return FermionOperator(
            self.n_modes,
            {tuple((m, 1 - d) for m, d in reversed(k)): np.conj(c) for k, c in self.terms.items()},
        )

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        diff = normal_order(self - self.adjoint())
        return all(abs(c) <= tol for c in diff.terms.values())

    def simplify(self, tol: float = 1e-12) -> "FermionOperator":
        return FermionOperator(self.n_modes, {k: c for k, c in self.terms.items() if abs(c) > tol})

    def to_matrix(self) -> np.ndarray:
        return fermion_dense(self)


def creation(n_modes: int, p: int) -> FermionOperator:
    return FermionOperator.term(n_modes, [(p, 1)])


def annihilation(n_modes: int, p: int) -> FermionOperator:
    return FermionOperator.term(n_modes, [(p, 0)])


def number(n_modes: int, p: int) -> FermionOperator:
    return FermionOperator.term(n_modes, [(p, 1), (p, 0)])


@lru_cache(maxsize=None)
def _normal_order_product(product: Product) -> Tuple[Tuple[Product, int], ...]:
    """Expand one product into canonical products with integer weights.

    Canonical: creation operators left of annihilators, descending mode
    index inside each block.
    """
    ops = list(product)
    for i in range(len(ops) - 1):
        (m1, d1), (m2, d2) = ops[i], ops[i + 1]
        key1, key2 = (d1, m1), (d2, m2)
        if key1 == key2:
            return ()  # repeated ladder operator squares to zero
        if key1 < key2:
            swapped = tuple(ops[:i] + [ops[i + 1], ops[i]] + ops[i + 2:])
            result: Dict[Product, int] = {}
            for prod, w in _normal_order_product(swapped):
                result[prod] = result.get(prod, 0) - w
            if m1 == m2:  # c_p c+_p = 1 - c+_p c_p
                contracted = tuple(ops[:i] + ops[i + 2:])
                for prod, w in _normal_order_product(contracted):
                    result[prod] = result.get(prod, 0) + w
            return tuple((p, w) for p, w in result.items() if w)
    return ((product, 1),)


def normal_order(f: FermionOperator, tol: float = 1e-14) -> FermionOperator:
    out: Dict[Product, complex] = {}
    for prod, c in f.terms.items():
        for p, w in _normal_order_product(prod):
            out[p] = out.get(p, 0.0) + c * w
    return FermionOperator(f.n_modes, {k: c for k, c in out.items() if abs(c) > tol})


def from_integrals(h1: np.ndarray, g: Optional[np.ndarray] = None, constant: float = 0.0,
                   tol: float = 1e-14) -> FermionOperator:
    """``sum h1[p,q] c+_p c_q + 1/2 sum g[p,q,r,s] c+_p c+_r c_s c_q``."""
    n = h1.shape[0]
    terms: Dict[Product, complex] = {}
    if constant:
        terms[()] = constant
    for p, q in zip(*np.nonzero(np.abs(h1) > tol)):
        terms[((p, 1), (q, 0))] = terms.get(((p, 1), (q, 0)), 0.0) + h1[p, q]
    if g is not None:
        for p, q, r, s in zip(*np.nonzero(np.abs(g) > tol)):
            if p == r or q == s:
                continue
            key = ((int(p), 1), (int(r), 1), (int(s), 0), (int(q), 0))
            terms[key] = terms.get(key, 0.0) + 0.5 * g[p, q, r, s]
    terms = {tuple((int(m), int(d)) for m, d in k): c for k, c in terms.items()}
    return normal_order(FermionOperator(n, terms))


# ---------------------------------------------------------------- dense oracle

@lru_cache(maxsize=None)
def _dense_annihilators(n_modes: int) -> Tuple[np.ndarray, ...]:
    """Jordan-Wigner matrices built with Kronecker products (mode 0 = LSB)."""
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    zmat = np.diag([1.0, -1.0])
    eye = np.eye(2)
    mats = []
    for j in range(n_modes):
        factors = []
        for q in reversed(range(n_modes)):  # kron order: highest qubit first
            factors.append(zmat if q < j else lower if q == j else eye)
        m = factors[0]
        for f in factors[1:]:
            m = np.kron(m, f)
        mats.append(m)
    return tuple(mats)


def fermion_dense(f: FermionOperator) -> np.ndarray:
    """Dense matrix of ``f`` in the occupation basis (bit ``p`` = mode ``p``)."""
    ann = _dense_annihilators(f.n_modes)
    dim = 1 << f.n_modes
    out = np.zeros((dim, dim), dtype=complex)
    for prod, c in f.terms.items():
        m = np.eye(dim)
        for mode, dag in prod:
            m = m @ (ann[mode].T if dag else ann[mode])
        out += c * m
    return out


def sector_indices(n_modes: int, n_electrons: int, two_sz: int) -> np.ndarray:
    """Occupation-basis indices with the requested (N_e, 2S_z) for spin blocks."""
    half = n_modes // 2
    idx = np.arange(1 << n_modes)
    up = np.array([bin(i & ((1 << half) - 1)).count("1") for i in idx])
    tot = np.array([bin(i).count("1") for i in idx])
    down = tot - up
    return idx[(tot == n_electrons) & (up - down == two_sz)]


# ---------------------------------------------------------------- encodings

@dataclass(frozen=True)
class EncodingSpec:
    """How to map fermion modes onto qubits.

    ``mode_order[k]`` is the fermion mode placed at encoding position ``k``.
    ``sector`` is ``(N_e, 2S_z)``.
    """

    kind: str = "parity_reduced"
    n_modes: int = 8
    sector: Tuple[int, int] = (4, 0)
    mode_order: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind not in ("jordan_wigner", "parity", "parity_reduced"):
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        if self.mode_order is not None and sorted(self.mode_order) != list(range(self.n_modes)):
            raise ValueError("mode_order must be a permutation of the modes")
        if self.kind == "parity_reduced":
            if self.n_modes % 2:
                raise ValueError("parity reduction needs an even number of spin-orbitals")
            n_e, two_sz = self.sector
            n_up2 = n_e + two_sz
            if n_up2 % 2 or not (0 <= n_up2 // 2 <= self.n_modes // 2) or not (
                    0 <= n_e - n_up2 // 2 <= self.n_modes // 2):
                raise ValueError(f"sector {self.sector} has an empty Hilbert space")

    @property
    def n_qubits(self) -> int:
        return self.n_modes - 2 if self.kind == "parity_reduced" else self.n_modes

    @property
    def n_up(self) -> int:
        n_e, two_sz = self.sector
        return (n_e + two_sz) // 2

    @property
    def n_down(self) -> int:
        return self.sector[0] - self.n_up

    def position(self, mode: int) -> int:
        if self.mode_order is None:
            return mode
        return self.mode_order.index(mode)


@lru_cache(maxsize=None)
def _ladder_images(kind: str, n: int) -> Tuple[Tuple[QubitOperator, QubitOperator], ...]:
    """(annihilation, creation) images for every position on ``n`` qubits."""
    out = []
    full = (1 << n) - 1
    for j in range(n):
        if kind == "jordan_wigner":
            zs = (1 << j) - 1
            xp = PauliTerm(n, 1 << j, zs)
            yp = PauliTerm(n, 1 << j, zs | (1 << j))
            # Z-string times (X + iY)/2; Z_k Y_j with k<j stays a letter string
        else:  # parity: (Z_{j-1} X_j + i Y_j)/2 * X_{>j}
            upper = full & ~((1 << (j + 1)) - 1)
            zprev = (1 << (j - 1)) if j > 0 else 0
            xp = PauliTerm(n, (1 << j) | upper, zprev)
            yp = PauliTerm(n, (1 << j) | upper, 1 << j)
        ann = QubitOperator(n, {xp.key: 0.5, yp.key: 0.5j})
        cre = QubitOperator(n, {xp.key: 0.5, yp.key: -0.5j})
        out.append((ann, cre))
    return tuple(out)


def _check_sector_conserving(f: FermionOperator, half: int) -> None:
    for prod, c in f.terms.items():
        if abs(c) < 1e-14:
            continue
        up = sum((1 if d else -1) for m, d in prod if m < half)
        dn = sum((1 if d else -1) for m, d in prod if m >= half)
        if up or dn:
            raise ValueError("operator does not conserve N_up and N_down; "
                             "parity reduction is not applicable")


def encode(f: FermionOperator, spec: EncodingSpec, tol: float = 1e-13) -> QubitOperator:
    """Map ``f`` to a qubit operator according to ``spec``."""
    n = spec.n_modes
    if f.n_modes > n:
        raise ValueError("operator acts on more modes than the encoding provides")
    kind = "jordan_wigner" if spec.kind == "jordan_wigner" else "parity"
    images = _ladder_images(kind, n)
    if spec.mode_order is not None:
        f = relabel(f, {m: spec.position(m) for m in range(n)})
    if spec.kind == "parity_reduced":
        _check_sector_conserving(normal_order(f), n // 2)
    result = QubitOperator(n)
    for prod, c in f.terms.items():
        if abs(c) < tol:
            continue
        term = QubitOperator.identity(n, c)
        for mode, dag in prod:
            term = term * images[mode][dag]
        result = result + term
    result = result.simplify(tol)
    if spec.kind == "parity_reduced":
        result = reduce_parity_qubits(result, n, spec.n_up, spec.sector[0])
    return result


def reduce_parity_qubits(op: QubitOperator, n_modes: int, n_up: int, n_e: int,
                         tol: float = 1e-13) -> QubitOperator:
    """Remove the up-parity qubit and total-parity qubit of a parity encoding.

    Z on qubit ``n/2 - 1`` is replaced by ``(-1)**N_up`` and Z on qubit
    ``n - 1`` by ``(-1)**N_e``; the remaining qubits are renumbered
    contiguously (up block first).
    """
    r1, r2 = n_modes // 2 - 1, n_modes - 1
    eig = {r1: (-1) ** n_up, r2: (-1) ** n_e}
    out: Dict[Tuple[int, int], complex] = {}
    for (x, z), c in op.terms.items():
        if abs(c) < tol:
            continue
        for r in (r1, r2):
            if (x >> r) & 1:
                raise ValueError("term flips a conserved parity qubit")
            if (z >> r) & 1:
                c = c * eig[r]
        key = (_drop_bits(x, r1, r2), _drop_bits(z, r1, r2))
        out[key] = out.get(key, 0.0) + c
    return QubitOperator(n_modes - 2, {k: c for k, c in out.items() if abs(c) > tol})


def _drop_bits(v: int, r1: int, r2: int) -> int:
    low = v & ((1 << r1) - 1)
    mid = (v >> (r1 + 1)) & ((1 << (r2 - r1 - 1)) - 1)
    return low | (mid << r1)


def relabel(f: FermionOperator, mapping: Dict[int, int]) -> FermionOperator:
    return FermionOperator(
        f.n_modes, {tuple((mapping[m], d) for m, d in k): c for k, c in f.terms.items()})


def occupations_to_index(occ: Sequence[int], spec: EncodingSpec) -> int:
    """Computational-basis index of an occupation pattern under ``spec``."""
    n = spec.n_modes
    bits = [0] * n
    for m, o in enumerate(occ):
        bits[spec.position(m)] = int(o)
    if spec.kind == "jordan_wigner":
        return sum(b << k for k, b in enumerate(bits))
    parity = np.cumsum(bits) % 2
    if spec.kind == "parity":
        return int(sum(int(b) << k for k, b in enumerate(parity)))
    half = n // 2
    if sum(bits[:half]) != spec.n_up or sum(bits[half:]) != spec.n_down:
        raise ValueError("occupation inconsistent with the encoding sector")
    kept = [parity[k] for k in range(n) if k not in (half - 1, n - 1)]
    return int(sum(int(b) << k for k, b in enumerate(kept)))


def index_to_occupations(index: np.ndarray | int, spec: EncodingSpec) -> np.ndarray:
    """Invert the encoding on computational-basis indices.

    For the reduced parity encoding the two dropped parities are restored
    from the sector, so strings outside the sector decode to occupations
    with the wrong N_e or S_z (useful for symmetry filtering).
    """
    n = spec.n_modes
    idx = np.atleast_1d(np.asarray(index, dtype=np.int64))
    if spec.kind == "jordan_wigner":
        bits = (idx[:, None] >> np.arange(n)) & 1
    else:
        if spec.kind == "parity":
            par = (idx[:, None] >> np.arange(n)) & 1
        else:
            half = n // 2
            reduced = (idx[:, None] >> np.arange(n - 2)) & 1
            par = np.empty((idx.size, n), dtype=np.int64)
            par[:, :half - 1] = reduced[:, :half - 1]
            par[:, half - 1] = spec.n_up % 2
            par[:, half:n - 1] = reduced[:, half - 1:]
            par[:, n - 1] = spec.sector[0] % 2
        bits = par.copy()
        bits[:, 1:] = par[:, 1:] ^ par[:, :-1]
    if spec.mode_order is not None:
        bits = bits[:, [spec.position(m) for m in range(n)]]
    return bits if np.ndim(index) else bits[0]


# ---------------------------------------------------------------- orbitals and references

def mo_transform(one_body: np.ndarray, n_occ: int):
    """Eigen-decomposition of a per-spin one-body matrix.

    Returns ``(energies, rotation, occupation)`` with ascending energies,
    MO coefficients in the columns of ``rotation`` and a 0/1 occupation
    vector filling the lowest ``n_occ`` orbitals.
    """
    one_body = np.asarray(one_body, dtype=float)
    if one_body.ndim != 2 or one_body.shape[0] != one_body.shape[1]:
        raise ValueError("one-body matrix must be square")
    if not np.allclose(one_body, one_body.T, atol=1e-12):
        raise ValueError("one-body matrix must be symmetric")
    energies, rotation = np.linalg.eigh(one_body)
    occupation = np.zeros(len(energies), dtype=int)
    occupation[:n_occ] = 1
    return energies, rotation, occupation


def rotate_integrals(h1: np.ndarray, g: np.ndarray, C: np.ndarray):
    """Integrals in the basis ``d_m = sum_a C[a, m] c_a`` (``C`` real orthogonal)."""
    h = C.T @ h1 @ C
    gm = np.einsum("pqrs,pa,qb,rc,sd->abcd", g, C, C, C, C, optimize=True)
    return h, gm


def restricted_scf(h_spatial: np.ndarray, g_spatial: np.ndarray, n_occ: int,
                   mixing: float = 0.5, max_iter: int = 2000, tol: float = 1e-11):
    """Closed-shell Hartree-Fock on spatial integrals with density damping.

    The two-body convention is ``1/2 sum g[p,q,r,s] c+_p c+_r c_s c_q`` with
    ``(p,q)`` and ``(r,s)`` each carrying one spin.  Plain Roothaan
    iterations oscillate for the impurity presets, hence the damping.
    Returns ``(orbital energies, C, converged)``.
    """
    energies, C = np.linalg.eigh(h_spatial)
    D = C[:, :n_occ] @ C[:, :n_occ].T
    converged = False
    for _ in range(max_iter):
        J = 2 * np.einsum("pqrs,sr->pq", g_spatial, D)
        K = np.einsum("psrq,sr->pq", g_spatial, D)
        energies, C = np.linalg.eigh(h_spatial + J - K)
        D_new = C[:, :n_occ] @ C[:, :n_occ].T
        if np.abs(D_new - D).max() < tol:
            converged = True
            D = D_new
            break
        D = (1 - mixing) * D + mixing * D_new
    return energies, C, converged


def slater_determinant(C_up: np.ndarray, C_down: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """Statevector of ``prod d+_up prod d+_down |0>`` in the encoding ``spec``.

    ``C_up`` / ``C_down`` hold the occupied orbitals (columns) over the
    spatial orbitals of each spin block.
    """
    half = spec.n_modes // 2
    n_up, n_dn = C_up.shape[1], C_down.shape[1]
    if spec.kind == "parity_reduced" and (n_up, n_dn) != (spec.n_up, spec.n_down):
        raise ValueError("orbital occupation inconsistent with the encoding sector")
    psi = np.zeros(1 << spec.n_qubits, dtype=complex)
    for rows_up in combinations(range(half), n_up):
        a_up = np.linalg.det(C_up[list(rows_up), :]) if n_up else 1.0
        if abs(a_up) < 1e-15:
            continue
        for rows_dn in combinations(range(half), n_dn):
            a_dn = np.linalg.det(C_down[list(rows_dn), :]) if n_dn else 1.0
            if abs(a_dn) < 1e-15:
                continue
            occ = [0] * spec.n_modes
            for r in rows_up:
                occ[r] = 1
            for r in rows_dn:
                occ[half + r] = 1
            psi[occupations_to_index(occ, spec)] += a_up * a_dn
    return psi / np.linalg.norm(psi)


def product_state(occupation: Sequence[int], spec: EncodingSpec) -> np.ndarray:
    psi = np.zeros(1 << spec.n_qubits, dtype=complex)
    psi[occupations_to_index(occupation, spec)] = 1.0
    return psi
