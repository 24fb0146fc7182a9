"""Pauli strings as symplectic bit masks and real-weighted sums of them.

A Pauli string on ``n`` qubits is stored as two integers ``x`` and ``z``.
Qubit ``q`` carries the letter I, X, Z or Y according to bit ``q`` of
``(x, z)``: (0, 0), (1, 0), (0, 1), (1, 1).  The string denotes the
Hermitian operator ``i**popcount(x & z) * X**x Z**z``, i.e. a literal Y on
every qubit where both bits are set.

When rendered as text the leftmost character is the highest qubit index,
so ``"IIIZXY"`` has Y on qubit 0, X on qubit 1 and Z on qubit 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Tuple

import numpy as np

_PHASES = (1, 1j, -1, -1j)
_LETTERS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_BITS = {v: k for k, v in _LETTERS.items()}


def _popcount(v: int) -> int:
    return bin(v).count("1")


def product_phase(x1: int, z1: int, x2: int, z2: int) -> int:
    """Exponent ``k`` (mod 4) such that ``P1 P2 = i**k P3`` for letter strings."""
    xo1, yo1, zo1 = x1 & ~z1, x1 & z1, z1 & ~x1
    xo2, yo2, zo2 = x2 & ~z2, x2 & z2, z2 & ~x2
    plus = _popcount((xo1 & yo2) | (yo1 & zo2) | (zo1 & xo2))
    minus = _popcount((yo1 & xo2) | (zo1 & yo2) | (xo1 & zo2))
    return (plus - minus) % 4


@dataclass(frozen=True, order=True)
class PauliTerm:
    """A Pauli string with a phase in {+1, +i, -1, -i}.

    ``phase`` is the exponent of ``i``.
    """

    n_qubits: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        limit = 1 << self.n_qubits
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("bit masks exceed n_qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_string(cls, label: str) -> "PauliTerm":
        """Parse e.g. ``"IIIZXY"`` (leftmost = highest qubit).

        An optional leading sign ``+``, ``-``, ``i``, ``-i`` sets the phase.
        """
        phase = 0
        for prefix, p in (("-i", 3), ("+i", 1), ("i", 1), ("-", 2), ("+", 0)):
            if label.startswith(prefix):
                phase, label = p, label[len(prefix):]
                break
        n = len(label)
        x = z = 0
        for pos, ch in enumerate(label):
            try:
                bx, bz = _BITS[ch.upper()]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}") from None
            q = n - 1 - pos
            x |= bx << q
            z |= bz << q
        return cls(n, x, z, phase)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliTerm":
        bx, bz = _BITS[letter]
        return cls(n_qubits, bx << qubit, bz << qubit)

    @property
    def key(self) -> Tuple[int, int]:
        return self.x, self.z

    @property
    def coefficient(self) -> complex:
        return _PHASES[self.phase]

    def letter(self, qubit: int) -> str:
        return _LETTERS[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    def label(self) -> str:
        return "".join(self.letter(q) for q in reversed(range(self.n_qubits)))

    def __str__(self) -> str:
        sign = ("", "i", "-", "-i")[self.phase]
        return sign + self.label()

    def unsigned(self) -> "PauliTerm":
        return PauliTerm(self.n_qubits, self.x, self.z, 0)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def commutes_with(self, other: "PauliTerm") -> bool:
        return symplectic_form(self, other) == 0

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        return multiply(self, other)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix including the phase (little-endian)."""
        dim = 1 << self.n_qubits
        idx = np.arange(dim)
        out = np.zeros((dim, dim), dtype=complex)
        out[idx ^ self.x, idx] = _phase_vector(self.n_qubits, self.x, self.z)
        return out * self.coefficient


def _check_sizes(a: PauliTerm, b: PauliTerm) -> None:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product ``a * b`` with the accumulated phase."""
    _check_sizes(a, b)
    k = product_phase(a.x, a.z, b.x, b.z)
    return PauliTerm(a.n_qubits, a.x ^ b.x, a.z ^ b.z, a.phase + b.phase + k)


def symplectic_form(a: PauliTerm, b: PauliTerm) -> int:
    _check_sizes(a, b)
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2


def count_y(a: PauliTerm) -> int:
    return _popcount(a.x & a.z)


def weight(a: PauliTerm) -> int:
    return _popcount(a.x | a.z)


def commutator_over_2i(a: PauliTerm, b: PauliTerm) -> "QubitOperator":
    """``(ab - ba) / 2i``; zero when the strings commute, else ``+-`` one string."""
    _check_sizes(a, b)
    out = QubitOperator(n_qubits=a.n_qubits)
    if symplectic_form(a, b) == 0:
        return out
    # anticommuting: ab - ba = 2ab
    p = multiply(a, b)
    out.add_term(p.unsigned(), p.coefficient / 1j)
    return out


def _phase_vector(n_qubits: int, x: int, z: int) -> np.ndarray:
    """Entries ``v[b]`` with ``(X^x Z^z i^{x.z}) |b> = v[b] |b ^ x>``."""
    idx = np.arange(1 << n_qubits)
    parity = np.zeros(idx.shape, dtype=np.int64)
    zz = idx & z
    while zz.any():
        parity ^= zz & 1
        zz = zz >> 1
    sign = 1 - 2 * parity
    return sign * (1j ** _popcount(x & z))


@dataclass
class QubitOperator:
    """Sum of Pauli strings with complex coefficients.

    Keys are ``(x, z)`` masks of phase-free (Hermitian) strings; phases are
    always folded into the coefficient.
    """

    n_qubits: int
    terms: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    @classmethod
    def from_terms(cls, n_qubits: int, items: Iterable[Tuple[PauliTerm | str, complex]]) -> "QubitOperator":
        op = cls(n_qubits)
        for p, c in items:
            if isinstance(p, str):
                p = PauliTerm.from_string(p)
            op.add_term(p, c)
        return op

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "QubitOperator":
        return cls(n_qubits, {(0, 0): complex(coeff)})

    def add_term(self, p: PauliTerm, coeff: complex = 1.0) -> None:
        if p.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        key = p.key
        self.terms[key] = self.terms.get(key, 0.0) + coeff * p.coefficient

    def items(self) -> Iterator[Tuple[PauliTerm, complex]]:
        for (x, z), c in self.terms.items():
            yield PauliTerm(self.n_qubits, x, z), c

    def paulis(self) -> list:
        return [PauliTerm(self.n_qubits, x, z) for (x, z) in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def copy(self) -> "QubitOperator":
        return QubitOperator(self.n_qubits, dict(self.terms))

    def simplify(self, tol: float = 1e-12) -> "QubitOperator":
        return simplify(self, tol)

    def __add__(self, other: "QubitOperator") -> "QubitOperator":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit count mismatch")
        out = self.copy()
        for k, c in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + c
        return out

    def __sub__(self, other: "QubitOperator") -> "QubitOperator":
        return self + other * -1.0

    def __mul__(self, other):
        if isinstance(other, QubitOperator):
            if other.n_qubits != self.n_qubits:
                raise ValueError("qubit count mismatch")
            out: Dict[Tuple[int, int], complex] = {}
            for (x1, z1), c1 in self.terms.items():
                for (x2, z2), c2 in other.terms.items():
                    k = product_phase(x1, z1, x2, z2)
                    key = (x1 ^ x2, z1 ^ z2)
                    out[key] = out.get(key, 0.0) + c1 * c2 * _PHASES[k]
            return QubitOperator(self.n_qubits, out)
        return QubitOperator(self.n_qubits, {k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "QubitOperator":
        return QubitOperator(self.n_qubits, {k: np.conj(c) for k, c in self.terms.items()})

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in map(complex, self.terms.values()))

    def is_real(self, tol: float = 1e-10) -> bool:
        """True when every term is real as a matrix (real coefficient, even Y)."""
        for (x, z), c in self.terms.items():
            c = complex(c)
            if abs(c) <= tol:
                continue
            if abs(c.imag) > tol or _popcount(x & z) % 2:
                return False
        return True

    def real_coefficients(self) -> Dict[Tuple[int, int], float]:
        if not self.is_hermitian():
            raise ValueError("operator is not Hermitian")
        return {k: float(complex(c).real) for k, c in self.terms.items()}

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        idx = np.arange(dim)
        out = np.zeros((dim, dim), dtype=complex)
        for (x, z), c in self.terms.items():
            out[idx ^ x, idx] += c * _phase_vector(self.n_qubits, x, z)
        return out

    def constant(self) -> complex:
        return self.terms.get((0, 0), 0.0)

    def __str__(self) -> str:
        parts = [f"{complex(c).real:+.10g} {p.label()}" if abs(complex(c).imag) < 1e-14
                 else f"{complex(c):+.10g} {p.label()}" for p, c in self.items()]
        return "\n".join(parts) if parts else "0"


def simplify(op: QubitOperator, tol: float = 1e-12) -> QubitOperator:
    """Drop terms with ``|c| <= tol``; duplicate keys are merged on insertion."""
    return QubitOperator(op.n_qubits, {k: c for k, c in op.terms.items() if abs(c) > tol})


def from_mapping(n_qubits: int, mapping: Mapping[str, complex]) -> QubitOperator:
    return QubitOperator.from_terms(n_qubits, mapping.items())
