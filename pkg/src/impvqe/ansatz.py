"""Parameterized circuits and operator pools.

An :class:`Ansatz` is a reference tag plus an ordered list of steps.  A
step applies ``exp(-i theta_k sum_j w_j P_j)`` where the strings ``P_j``
mutually commute, so the exponential factorizes exactly into single
Pauli rotations.  Several steps may share a parameter (UCCSD excitations
use one step each, HVA layers one step per group).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .fermion import FermionOperator, encode
from .model import ImpurityModel, build_hamiltonian
from .pauli import PauliTerm, QubitOperator, count_y
from .simulator import (GateList, apply_pauli, apply_pauli_rotation, compile_rotation,
                        operator_matrix, rotation_cnot_count)

Generator = Tuple[Tuple[PauliTerm, float], ...]


@dataclass(frozen=True)
class Step:
    generator: Generator
    param: int

    def __post_init__(self):
        strings = [p for p, _ in self.generator]
        for a, b in combinations(strings, 2):
            if not a.commutes_with(b):
                raise ValueError(f"non-commuting strings {a} and {b} in one step")

    @property
    def n_qubits(self) -> int:
        return self.generator[0][0].n_qubits

    def apply(self, state: np.ndarray, theta: float) -> np.ndarray:
        for p, w in self.generator:
            state = apply_pauli_rotation(state, p, theta * w)
        return state

    def apply_generator(self, psi: np.ndarray) -> np.ndarray:
        """``G psi`` with ``G = sum w_j P_j`` (statevector only)."""
        out = np.zeros_like(psi)
        for p, w in self.generator:
            out += w * apply_pauli(psi, p)
        return out

    def cnot_count(self) -> int:
        return sum(rotation_cnot_count(p) for p, _ in self.generator)


@dataclass
class Ansatz:
    n_qubits: int
    reference: str
    steps: List[Step] = field(default_factory=list)
    n_parameters: int = 0
    labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        used = {s.param for s in self.steps}
        if used != set(range(self.n_parameters)):
            raise ValueError("every parameter must drive at least one step")
        for s in self.steps:
            if s.n_qubits != self.n_qubits:
                raise ValueError("step acts on the wrong number of qubits")

    @classmethod
    def from_paulis(cls, paulis: Sequence[PauliTerm], reference: str = "product_I") -> "Ansatz":
        """One parameter per string, ``exp(-i theta_k P_k)`` in list order."""
        if not paulis:
            raise ValueError("need at least one string; use Ansatz(n, ref) for an empty circuit")
        steps = [Step(((p, 1.0),), k) for k, p in enumerate(paulis)]
        return cls(paulis[0].n_qubits, reference, steps, len(paulis), [p.label() for p in paulis])

    def appended(self, p: PauliTerm) -> "Ansatz":
        steps = self.steps + [Step(((p, 1.0),), self.n_parameters)]
        return Ansatz(self.n_qubits, self.reference, steps, self.n_parameters + 1,
                      self.labels + [p.label()])

    @property
    def single_pauli(self) -> bool:
        """True when each parameter drives exactly one unit-weight string."""
        return (len(self.steps) == self.n_parameters
                and all(len(s.generator) == 1 and s.generator[0][1] == 1.0 for s in self.steps))

    def paulis(self) -> List[PauliTerm]:
        if not self.single_pauli:
            raise ValueError("ansatz has multi-string steps")
        return [s.generator[0][0] for s in self.steps]

    def state(self, theta: Sequence[float], psi0: np.ndarray) -> np.ndarray:
        theta = self._check(theta)
        psi = psi0
        for s in self.steps:
            psi = s.apply(psi, theta[s.param])
        return psi

    def energy(self, theta, psi0, h: QubitOperator) -> float:
        psi = self.state(theta, psi0)
        return float(np.real(np.vdot(psi, operator_matrix(h) @ psi)))

    def energy_and_gradient(self, theta, psi0: np.ndarray, h: QubitOperator):
        """Energy and exact gradient by a backward (adjoint) sweep."""
        theta = self._check(theta)
        H = operator_matrix(h)
        psi = self.state(theta, psi0)
        lam = H @ psi
        energy = float(np.real(np.vdot(psi, lam)))
        grad = np.zeros(self.n_parameters)
        for s in reversed(self.steps):
            grad[s.param] += 2 * np.imag(np.vdot(lam, s.apply_generator(psi)))
            psi = s.apply(psi, -theta[s.param])
            lam = s.apply(lam, -theta[s.param])
        return energy, grad

    def gates(self, theta: Sequence[float]) -> GateList:
        theta = self._check(theta)
        out = GateList(self.n_qubits)
        for s in self.steps:
            for p, w in s.generator:
                out.extend(compile_rotation(p, theta[s.param] * w))
        return out

    def cnot_count(self) -> int:
        return sum(s.cnot_count() for s in self.steps)

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_parameters,):
            raise ValueError(f"expected {self.n_parameters} parameters, got {theta.shape}")
        return theta


# ---------------------------------------------------------------- excitations

def _anti_hermitian_strings(t: FermionOperator, spec) -> Generator:
    """Weights ``w`` with ``exp(theta (T - T+)) = prod exp(-i theta w P)``."""
    q = encode(t - t.adjoint(), spec)
    out = []
    for p, c in sorted(q.items(), key=lambda pc: pc[0].label()):
        c = complex(c)
        if abs(c) < 1e-12:
            continue
        if abs(c.real) > 1e-12:
            raise ValueError("anti-Hermitian image expected")
        # T - T+ = sum i c_im P = -i sum (-c_im) P
        out.append((p, -c.imag))
    return tuple(out)


def excitations(m: ImpurityModel, paired_only: bool = False) -> List[Tuple[str, FermionOperator]]:
    """Spin-conserving singles then doubles relative to the MO reference.

    MO ``k`` of spin ``s`` is mode ``s * n_spatial + k``; the lowest
    ``N_e/2`` MOs of each spin are occupied.
    """
    n, ns = m.n_modes, m.n_spatial
    n_up, n_dn = (m.n_e + m.two_sz) // 2, (m.n_e - m.two_sz) // 2
    occ = [list(range(n_up)), list(range(n_dn))]
    vir = [list(range(n_up, ns)), list(range(n_dn, ns))]
    mode = lambda s, k: s * ns + k  # noqa: E731
    singles, doubles = [], []
    for s in range(2):
        for i in occ[s]:
            for a in vir[s]:
                singles.append((f"s{s}:{i}->{a}",
                                FermionOperator.term(n, [(mode(s, a), 1), (mode(s, i), 0)])))
    if paired_only:
        for i in occ[0]:
            for a in vir[0]:
                if i in occ[1] and a in vir[1]:
                    doubles.append((f"p:{i}->{a}", FermionOperator.term(
                        n, [(mode(0, a), 1), (mode(1, a), 1), (mode(1, i), 0), (mode(0, i), 0)])))
        return singles + doubles
    occ_so = [mode(0, i) for i in occ[0]] + [mode(1, i) for i in occ[1]]
    vir_so = [mode(0, a) for a in vir[0]] + [mode(1, a) for a in vir[1]]
    spin = lambda p: p // ns  # noqa: E731
    for i, j in combinations(occ_so, 2):
        for a, b in combinations(vir_so, 2):
            if sorted((spin(a), spin(b))) != sorted((spin(i), spin(j))):
                continue
            doubles.append((f"d:{i},{j}->{a},{b}",
                            FermionOperator.term(n, [(a, 1), (b, 1), (j, 0), (i, 0)])))
    return singles + doubles


def build_uccsd(m: ImpurityModel, kind: str = "parity_reduced") -> Ansatz:
    """Single-step Trotterized UCCSD on the Hartree-Fock reference, singles first."""
    spec = m.encoding(kind)
    steps, labels = [], []
    for k, (label, t) in enumerate(excitations(m)):
        steps.append(Step(_anti_hermitian_strings(t, spec), k))
        labels.append(label)
    return Ansatz(spec.n_qubits, "hartree_fock", steps, len(steps), labels)


# ---------------------------------------------------------------- HVA

def _number(n, p):
    return FermionOperator.term(n, [(p, 1), (p, 0)])


def hva_groups(m: ImpurityModel, kind: str = "parity_reduced",
               partition: str = "five") -> List[Tuple[str, QubitOperator]]:
    """Commuting groups of Hamiltonian terms, interacting groups first.

    ``partition="five"`` (default): Hund exchange squares (one group per
    set of disjoint orbital pairs), ``U n n``, ``(U-2J) n n``,
    hybridization, diagonal one-body levels.  ``"four"`` merges the two
    density-density groups.  Identity parts are dropped.
    """
    if partition not in ("five", "four"):
        raise ValueError("partition must be 'five' or 'four'")
    spec = m.encoding(kind)
    n, M = m.n_modes, m.M
    groups: List[Tuple[str, FermionOperator]] = []
    # J/2 (sum_s c+_as c_bs + h.c.)^2 collects spin-flip, pair hopping and
    # the matching exchange densities; pairs sharing an orbital don't commute
    pairs = list(combinations(range(M), 2))
    colors: List[List[Tuple[int, int]]] = []
    for pair in pairs:
        for c in colors:
            if all(not set(pair) & set(q) for q in c):
                c.append(pair)
                break
        else:
            colors.append([pair])
    for c in colors:
        op = FermionOperator(n)
        for a, b in c:
            A = FermionOperator(n)
            for s in range(2):
                A = A + FermionOperator.term(n, [(m.mode(a, s), 1), (m.mode(b, s), 0)])
                A = A + FermionOperator.term(n, [(m.mode(b, s), 1), (m.mode(a, s), 0)])
            op = op + A * A * (m.J / 2)
        groups.append((f"exchange{c}", op))
    onsite, inter = FermionOperator(n), FermionOperator(n)
    for a in range(M):
        onsite = onsite + _number(n, m.mode(a, 0)) * _number(n, m.mode(a, 1)) * m.U
        for b in range(a + 1, M):
            for s in range(2):
                for t in range(2):
                    inter = inter + _number(n, m.mode(a, s)) * _number(n, m.mode(b, t)) * (m.U - 2 * m.J)
    if partition == "five":
        groups += [("onsite", onsite), ("interorbital", inter)]
    else:
        groups.append(("density", onsite + inter))
    hyb = FermionOperator(n)
    for a in range(M):
        for s in range(2):
            p, f = m.mode(a, s), m.mode(a, s, bath=True)
            hyb = hyb + FermionOperator.term(n, [(p, 1), (f, 0)], m.delta)
            hyb = hyb + FermionOperator.term(n, [(f, 1), (p, 0)], m.delta)
    groups.append(("hybridization", hyb))
    encoded = [(name, encode(op, spec)) for name, op in groups]
    h = encode(build_hamiltonian(m), spec)
    rest = h
    for _, q in encoded:
        rest = rest - q
    rest = rest.simplify(1e-10)
    if any(x for (x, z) in rest.terms):
        raise RuntimeError("HVA grouping left off-diagonal remainder")
    encoded.append(("levels", rest))
    out = []
    for name, q in encoded:
        q = QubitOperator(q.n_qubits, {k: c for k, c in q.simplify(1e-10).terms.items() if k != (0, 0)})
        out.append((name, q))
    return out


def build_hva(m: ImpurityModel, layers: int, kind: str = "parity_reduced",
              partition: str = "five") -> Ansatz:
    """``prod_l prod_j exp(-i theta_lj h_j)`` on the ``product_I`` reference."""
    if layers < 1:
        raise ValueError("need at least one layer")
    groups = hva_groups(m, kind, partition)
    steps, labels = [], []
    for layer in range(layers):
        for j, (name, q) in enumerate(groups):
            gen = tuple((p, float(complex(c).real)) for p, c in sorted(q.items(), key=lambda pc: pc[0].label()))
            steps.append(Step(gen, layer * len(groups) + j))
            labels.append(f"L{layer}:{name}")
    n_q = m.encoding(kind).n_qubits
    return Ansatz(n_q, "product_I", steps, len(steps), labels)


HVA_INIT = np.pi / 7


# ---------------------------------------------------------------- pools

@dataclass(frozen=True)
class OperatorPool:
    name: str
    elements: Tuple[PauliTerm, ...]
    tags: Tuple[str, ...] = ()

    def __post_init__(self):
        keys = [p.key for p in self.elements]
        if len(set(keys)) != len(keys):
            raise ValueError("pool elements must be unique")
        for p in self.elements:
            if p.phase or count_y(p) % 2 == 0:
                raise ValueError(f"pool element {p} must be an unsigned odd-Y string")
        if self.tags and len(self.tags) != len(self.elements):
            raise ValueError("one tag per element")

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def n_qubits(self) -> int:
        return self.elements[0].n_qubits

    def labels(self) -> List[str]:
        return [p.label() for p in self.elements]


def _dedupe(items: Iterable[Tuple[PauliTerm, str]], name: str) -> OperatorPool:
    seen: Dict[Tuple[int, int], Tuple[PauliTerm, str]] = {}
    for p, tag in items:
        p = p.unsigned()
        if p.key not in seen:
            seen[p.key] = (p, tag)
    ordered = sorted(seen.values(), key=lambda pt: pt[0].label())
    return OperatorPool(name, tuple(p for p, _ in ordered), tuple(t for _, t in ordered))


def pool_uccsd(m: ImpurityModel, kind: str = "parity_reduced") -> OperatorPool:
    """Every string of every encoded single and double excitation."""
    spec = m.encoding(kind)
    items = [(p, label) for label, t in excitations(m) for p, _ in _anti_hermitian_strings(t, spec)]
    return _dedupe(items, "uccsd")


def pool_succspd(m: ImpurityModel, kind: str = "parity_reduced", all_strings: bool = False) -> OperatorPool:
    """Singles and paired doubles; by default only the lexicographically first
    string of each excitation is kept."""
    spec = m.encoding(kind)
    items = []
    for label, t in excitations(m, paired_only=True):
        strings = [p for p, _ in _anti_hermitian_strings(t, spec)]
        strings = [p for p in strings if count_y(p) % 2]
        if not all_strings:
            strings = strings[:1]  # already in label order
        items += [(p, label) for p in strings]
    return _dedupe(items, "succspd_all" if all_strings else "succspd")


def pool_hc(h: QubitOperator) -> OperatorPool:
    """Distinct ``[P, P'] / 2i`` over anticommuting Hamiltonian term pairs with odd Y."""
    if not h.is_real():
        raise ValueError("Hamiltonian must be real (even-Y strings, real weights)")
    terms = sorted((p for p, c in h.items() if not p.is_identity() and abs(c) > 1e-12),
                   key=PauliTerm.label)
    items = []
    for a, b in combinations(terms, 2):
        if a.commutes_with(b):
            continue
        prod = a * b
        if count_y(prod) % 2:
            items.append((prod, f"[{a.label()},{b.label()}]"))
    return _dedupe(items, "hc")


def strip_z(pool: OperatorPool) -> OperatorPool:
    """Replace every Z letter by I; Y letters are kept so the Y parity is unchanged."""
    items = [(PauliTerm(p.n_qubits, p.x, p.z & p.x), t) for p, t in zip(pool.elements, pool.tags or [""] * len(pool))]
    return _dedupe(items, pool.name + "_noz")


def lie_closure_size(elements: Sequence[PauliTerm], limit: int = 1 << 14) -> int:
    """Number of Pauli strings in the Lie algebra generated by ``elements``."""
    gens = [p.unsigned() for p in elements]
    seen = {p.key for p in gens}
    queue = list(gens)
    while queue and len(seen) < limit:
        x = queue.pop()
        for g in gens:
            if not x.commutes_with(g):
                y = (g * x).unsigned()
                if y.key not in seen:
                    seen.add(y.key)
                    queue.append(y)
    return len(seen)


def _support(p: PauliTerm) -> int:
    return p.x | p.z


def pool_mcp(stripped: OperatorPool, n_qubits: Optional[int] = None) -> OperatorPool:
    """Greedy subset of size ``2(n - 1)``.

    Each pick maximizes the Lie closure of the chosen set; ties go to the
    candidate touching the most uncovered qubits, then to overlap with the
    current support, then to label order.  Completeness still has to be
    certified by an ADAPT run (see :func:`impvqe.adapt.certify_pool`).
    """
    n = n_qubits or stripped.n_qubits
    size = 2 * (n - 1)
    if len(stripped) < size:
        raise ValueError("pool smaller than the minimal complete size")
    chosen: List[PauliTerm] = []
    tags: List[str] = []
    remaining = list(zip(stripped.elements, stripped.tags or [""] * len(stripped)))
    while len(chosen) < size:
        covered = 0
        for p in chosen:
            covered |= _support(p)
        best = None
        for i, (p, _) in enumerate(remaining):
            score = (lie_closure_size(chosen + [p]),
                     bin(_support(p) & ~covered).count("1"),
                     bin(_support(p) & covered).count("1") > 0 or not chosen,
                     [-ord(ch) for ch in p.label()])
            if best is None or score > best[0]:
                best = (score, i)
        p, t = remaining.pop(best[1])
        chosen.append(p)
        tags.append(t)
    return OperatorPool("mcp", tuple(chosen), tuple(tags))


# ---------------------------------------------------------------- manifests

def dumps(ansatz: Ansatz, theta: Optional[Sequence[float]] = None) -> str:
    """Text manifest: header lines, then one ``step`` line per step.

    ``step <param> <weight> <string> [<weight> <string> ...]`` and, when
    values are given, ``theta <param> <value>`` lines.
    """
    lines = [f"n_qubits {ansatz.n_qubits}", f"reference {ansatz.reference}",
             f"n_parameters {ansatz.n_parameters}"]
    for s in ansatz.steps:
        body = " ".join(f"{w:.17g} {p.label()}" for p, w in s.generator)
        lines.append(f"step {s.param} {body}")
    if theta is not None:
        for k, v in enumerate(theta):
            lines.append(f"theta {k} {float(v):.17g}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Tuple[Ansatz, Optional[np.ndarray]]:
    """Parse :func:`dumps` output, or a bare comma/whitespace separated list
    of Pauli strings (one parameter each, ``product_I`` reference)."""
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if rows and not rows[0].split()[0] in ("n_qubits", "reference", "n_parameters", "step", "theta"):
        labels = [tok for r in rows for tok in r.replace(",", " ").split() if tok not in (".",)]
        labels = [t.rstrip(".") for t in labels]
        return Ansatz.from_paulis([PauliTerm.from_string(t) for t in labels]), None
    header: Dict[str, str] = {}
    steps, theta = [], {}
    for lineno, r in enumerate(rows, 1):
        key, *rest = r.split()
        try:
            if key == "step":
                param = int(rest[0])
                toks = rest[1:]
                if not toks or len(toks) % 2:
                    raise ValueError("expected weight/string pairs")
                gen = tuple((PauliTerm.from_string(toks[i + 1]), float(toks[i]))
                            for i in range(0, len(toks), 2))
                steps.append(Step(gen, param))
            elif key == "theta":
                theta[int(rest[0])] = float(rest[1])
            elif key in ("n_qubits", "reference", "n_parameters"):
                header[key] = rest[0]
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"manifest line {lineno}: {exc}") from None
    n_params = int(header.get("n_parameters", len({s.param for s in steps})))
    ansatz = Ansatz(int(header["n_qubits"]), header.get("reference", "product_I"), steps, n_params)
    values = None
    if theta:
        values = np.array([theta[k] for k in range(n_params)])
    return ansatz, values


def published_eg_ansatz() -> Ansatz:
    """The 32-generator converged e_g qubit-ADAPT circuit shipped in ``data/``."""
    text = resources.files("impvqe.data").joinpath("eg_adapt32.txt").read_text()
    return loads(text)[0]
