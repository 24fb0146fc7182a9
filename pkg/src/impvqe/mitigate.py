"""Simulated error mitigation.

Counts are handled as dense vectors indexed by computational-basis index
(qubit 0 is the least significant bit).  ``counts_from_dict`` and
``counts_to_dict`` convert to bitstring histograms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fermion import EncodingSpec, index_to_occupations
from .measure import CompiledGroup
from .simulator import GateList, NoiseModel, NoisyExecutor, probabilities


# ---------------------------------------------------------------- readout

@dataclass(frozen=True)
class ReadoutModel:
    p01: Tuple[float, ...]  # P(read 1 | prepared 0), per qubit
    p10: Tuple[float, ...]  # P(read 0 | prepared 1)

    def __post_init__(self):
        if len(self.p01) != len(self.p10):
            raise ValueError("p01 and p10 must have one entry per qubit")
        for p in (*self.p01, *self.p10):
            if not 0.0 <= p <= 1.0:
                raise ValueError("flip probabilities must lie in [0, 1]")

    @classmethod
    def uniform(cls, n_qubits: int, p01: float, p10: Optional[float] = None) -> "ReadoutModel":
        return cls((p01,) * n_qubits, ((p01 if p10 is None else p10),) * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    def qubit_matrix(self, q: int) -> np.ndarray:
        a, b = self.p01[q], self.p10[q]
        return np.array([[1 - a, b], [a, 1 - b]])


def confusion_matrix(model: ReadoutModel, calibration_shots: Optional[int] = None, seed=None) -> np.ndarray:
    """Column-stochastic ``M[read, prepared]`` as a tensor product over qubits.

    With ``calibration_shots`` the per-qubit rates are estimated from
    sampled calibration runs instead of taken exactly.
    """
    rng = np.random.default_rng(seed)
    m = np.ones((1, 1))
    for q in reversed(range(model.n_qubits)):
        mq = model.qubit_matrix(q)
        if calibration_shots:
            a = rng.binomial(calibration_shots, mq[1, 0]) / calibration_shots
            b = rng.binomial(calibration_shots, mq[0, 1]) / calibration_shots
            mq = np.array([[1 - a, b], [a, 1 - b]])
        m = np.kron(m, mq)
    return m


def apply_readout(counts: np.ndarray, model: ReadoutModel, seed=None) -> np.ndarray:
    """Resample each shot through the per-qubit flip channel."""
    rng = np.random.default_rng(seed)
    counts = np.asarray(counts, dtype=np.int64)
    probs = confusion_matrix(model) @ (counts / counts.sum())
    return rng.multinomial(int(counts.sum()), probs / probs.sum())


def mitigate_counts(counts: np.ndarray, confusion: np.ndarray) -> np.ndarray:
    """Least-squares inversion of ``confusion``; negative mass is clipped and
    the result rescaled to the original shot total."""
    counts = np.asarray(counts, dtype=float)
    if confusion.shape != (counts.size, counts.size):
        raise ValueError("confusion matrix does not match the counts vector")
    if np.linalg.matrix_rank(confusion) < counts.size:
        raise np.linalg.LinAlgError("confusion matrix is singular")
    x = np.linalg.lstsq(confusion, counts, rcond=None)[0]
    x = np.clip(x, 0.0, None)
    s = x.sum()
    return x * (counts.sum() / s) if s > 0 else x


def counts_from_dict(hist: Dict[str, int], n_qubits: int) -> np.ndarray:
    out = np.zeros(1 << n_qubits, dtype=np.int64)
    for bits, c in hist.items():
        out[int(bits, 2)] += c
    return out


def counts_to_dict(counts: np.ndarray) -> Dict[str, int]:
    n = int(counts.size).bit_length() - 1
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


# ---------------------------------------------------------------- symmetry

@dataclass
class FilterResult:
    counts: np.ndarray
    mean_ne_deviation: float
    mean_sz_deviation: float
    discard_fraction: float
    empty: bool

    def selected(self, ne_tol: float = 0.2, sz_tol: float = 0.1) -> bool:
        """Run-selection predicate on the pre-filter symmetry violation."""
        return abs(self.mean_ne_deviation) < ne_tol and abs(self.mean_sz_deviation) < sz_tol


def symmetry_filter(counts: np.ndarray, occupations: np.ndarray, sector: Tuple[int, float]) -> FilterResult:
    """Keep only strings with ``N_e`` and ``S_z`` equal to ``sector``.

    ``occupations[i]`` is the decoded pattern of basis index ``i`` with
    spin-up modes in the first half.
    """
    counts = np.asarray(counts, dtype=float)
    occ = np.asarray(occupations)
    half = occ.shape[1] // 2
    n_up, n_dn = occ[:, :half].sum(1), occ[:, half:].sum(1)
    ne, sz = n_up + n_dn, (n_up - n_dn) / 2
    total = counts.sum()
    if total <= 0:
        raise ValueError("empty histogram")
    keep = (ne == sector[0]) & np.isclose(sz, sector[1])
    kept = np.where(keep, counts, 0.0)
    return FilterResult(
        counts=kept,
        mean_ne_deviation=float(counts @ ne / total - sector[0]),
        mean_sz_deviation=float(counts @ sz / total - sector[1]),
        discard_fraction=float(1 - kept.sum() / total),
        empty=bool(kept.sum() == 0))


def sector_occupations(spec: EncodingSpec) -> np.ndarray:
    return index_to_occupations(np.arange(1 << spec.n_qubits), spec)


# ---------------------------------------------------------------- folding

def fold(gates: GateList, scale: float, seed=None) -> GateList:
    """Local folding ``G -> G G^dag G``.

    Every gate is folded ``floor((scale-1)/2)`` times; a seeded random
    subset takes one extra fold so the length is ``scale * len(gates)``
    to within one folding unit.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    n = len(gates)
    extra = (scale - 1) / 2
    base = int(np.floor(extra + 1e-12))
    n_partial = int(round((extra - base) * n))
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(n, size=n_partial, replace=False).tolist()) if n_partial else set()
    out = GateList(gates.n_qubits, global_phase=gates.global_phase)
    for k, g in enumerate(gates):
        out.append(g)
        for _ in range(base + (k in chosen)):
            out.append(g.inverse())
            out.append(g)
    return out


# ---------------------------------------------------------------- extrapolation

@dataclass
class ZneSeries:
    scales: List[float] = field(default_factory=list)
    energies: List[float] = field(default_factory=list)
    stderrs: List[float] = field(default_factory=list)

    def add(self, scale: float, energy: float, stderr: float = 0.0) -> None:
        self.scales.append(float(scale))
        self.energies.append(float(energy))
        self.stderrs.append(float(stderr))


def richardson(series: ZneSeries, order: int = 2) -> Tuple[float, float]:
    """Polynomial fit in the noise scale, evaluated at zero.

    With more points than coefficients the fit is weighted by
    ``1/stderr^2`` when every point has a positive error bar.
    """
    lam = np.asarray(series.scales, dtype=float)
    e = np.asarray(series.energies, dtype=float)
    s = np.asarray(series.stderrs, dtype=float)
    if len(np.unique(lam)) < order + 1:
        raise ValueError(f"need at least {order + 1} distinct scales")
    if lam.size == order + 1:
        # interpolation: Lagrange weights at zero keep small-integer data exact
        row = np.array([np.prod([lj / (lj - li) for j, lj in enumerate(lam) if j != i])
                        for i, li in enumerate(lam)])
    else:
        X = np.vander(lam, order + 1, increasing=True)
        w = 1 / s ** 2 if np.all(s > 0) else np.ones_like(lam)
        row = np.linalg.solve(X.T @ (w[:, None] * X), X.T * w)[0]
    err = float(np.sqrt(np.sum((row * s) ** 2))) if np.all(s > 0) else 0.0
    return float(row @ e), err


# ---------------------------------------------------------------- pipeline

@dataclass
class ScalePoint:
    scale: float
    n_gates: int
    raw: float
    raw_stderr: float
    filtered: float
    filtered_stderr: float
    discard_fraction: float
    mean_ne_deviation: float
    mean_sz_deviation: float


@dataclass
class MitigationResult:
    points: List[ScalePoint]
    zne_raw: Tuple[float, float]
    zne_filtered: Tuple[float, float]

    @property
    def unmitigated(self) -> float:
        return self.points[0].raw


def _group_energy(counts: np.ndarray, diag: np.ndarray) -> Tuple[float, float]:
    n = counts.sum()
    mean = float(counts @ diag / n)
    var = max(float(counts @ diag ** 2 / n) - mean ** 2, 0.0)
    return mean, var / n


def mitigation_pipeline(prep: GateList, rho0: np.ndarray, groups: Sequence[CompiledGroup], spec: EncodingSpec,
                        noise: NoiseModel, n_shots: int, scales: Sequence[float] = (1, 2, 3), seed=None,
                        readout: Optional[ReadoutModel] = None) -> MitigationResult:
    """Noisy energy at each folding scale, raw and symmetry filtered, then
    quadratic extrapolation of both series.

    Each group's full circuit (state preparation plus basis rotation) is
    folded; readout errors, if given, are applied and then inverted.
    """
    rng = np.random.default_rng(seed)
    exe = NoisyExecutor(noise, spec.n_qubits)
    occ = sector_occupations(spec)
    sector = (spec.sector[0], spec.sector[1] / 2)
    conf = confusion_matrix(readout) if readout is not None else None
    raw_series, filt_series, points = ZneSeries(), ZneSeries(), []
    for lam in scales:
        e_raw = v_raw = e_f = v_f = 0.0
        disc, dne, dsz, n_gates = [], [], [], 0
        for cg in groups:
            circ = GateList(spec.n_qubits)
            circ.extend(prep)
            circ.extend(cg.circuit)
            folded = fold(circ, lam, seed=rng.integers(2 ** 63))
            n_gates += len(folded)
            probs = probabilities(exe.run(rho0, folded))
            counts = rng.multinomial(n_shots, probs)
            if readout is not None:
                counts = mitigate_counts(apply_readout(counts, readout, rng.integers(2 ** 63)), conf)
            m, v = _group_energy(counts, cg.diagonal)
            e_raw, v_raw = e_raw + m, v_raw + v
            fr = symmetry_filter(counts, occ, sector)
            if fr.empty:
                raise RuntimeError(f"symmetry filter discarded every shot (scale {lam}, group {cg.group.name})")
            m, v = _group_energy(fr.counts, cg.diagonal)
            e_f, v_f = e_f + m, v_f + v
            disc.append(fr.discard_fraction)
            dne.append(fr.mean_ne_deviation)
            dsz.append(fr.mean_sz_deviation)
        raw_series.add(lam, e_raw, np.sqrt(v_raw))
        filt_series.add(lam, e_f, np.sqrt(v_f))
        points.append(ScalePoint(float(lam), n_gates, e_raw, float(np.sqrt(v_raw)), e_f, float(np.sqrt(v_f)),
                                 float(np.mean(disc)), float(np.mean(dne)), float(np.mean(dsz))))
    return MitigationResult(points, richardson(raw_series), richardson(filt_series))
