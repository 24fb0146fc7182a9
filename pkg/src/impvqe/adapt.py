"""Qubit-ADAPT: grow ``prod_k exp(-i theta_k P_k) |ref>`` one pool string at a time.

Three execution backends share one loop:

* :class:`StatevectorBackend` exact energies, adjoint gradients, BFGS.
* :class:`SampledBackend` pure states, multinomial shot noise on every
  measurement group, SMO or Adadelta.
* :class:`NoisyBackend` density matrices under a gate noise model.  Energies
  are propagated in the Heisenberg picture and shot noise is drawn from the
  Gaussian limit of each group's estimator (mean and variance of the
  group observable are both exact).

Every SMO angle update uses that the circuit output is
``A + B cos 2t + C sin 2t`` in each angle ``t``, so the eight mesh points
cost three propagations instead of eight.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .ansatz import Ansatz, OperatorPool
from .measure import CompiledGroup
from .optim import (SHIFT, SMO_MESH, _wrap, adadelta_run, bfgs_minimize, fit_sinusoid, sinusoid_argmin,
                    smo_sweep)
from .pauli import PauliTerm, QubitOperator
from .simulator import (NoiseModel, NoisyExecutor, apply_pauli, apply_pauli_rotation, compile_rotation,
                        operator_matrix, run_gates)


@dataclass
class AdaptConfig:
    grad_tolerance: float = 1e-4
    max_parameters: int = 60
    optimizer: str = "bfgs"  # bfgs | smo | adadelta
    sweeps: int = 40
    adadelta_steps: int = 250
    screening_shots: int = 1 << 16
    tie_break: str = "lexicographic"  # or seeded_random
    tie_tolerance: float = 1e-9
    bfgs_gtol: float = 1e-8

    def __post_init__(self):
        if self.grad_tolerance <= 0:
            raise ValueError("grad_tolerance must be positive")
        if self.max_parameters < 0:
            raise ValueError("max_parameters must be >= 0")
        if self.optimizer not in ("bfgs", "smo", "adadelta"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.tie_break not in ("lexicographic", "seeded_random"):
            raise ValueError(f"unknown tie_break {self.tie_break!r}")


# ---------------------------------------------------------------- backends

class StatevectorBackend:
    name = "statevector"

    def __init__(self, h: QubitOperator, psi0: np.ndarray):
        self.h = h
        self.H = operator_matrix(h)
        self.psi0 = psi0

    def energy(self, ansatz: Ansatz, theta) -> float:
        return ansatz.energy(theta, self.psi0, self.h)

    def screen(self, ansatz: Ansatz, theta, pool: OperatorPool) -> np.ndarray:
        psi = ansatz.state(theta, self.psi0)
        hpsi = self.H @ psi
        # d/dt <psi| e^{itP} H e^{-itP} |psi> at 0 = -2 Im <P psi | H psi>
        return np.array([-2 * np.imag(np.vdot(apply_pauli(psi, p), hpsi)) for p in pool])

    def optimize(self, ansatz: Ansatz, theta0, config: AdaptConfig):
        fg = lambda t: ansatz.energy_and_gradient(t, self.psi0, self.h)  # noqa: E731
        if config.optimizer == "adadelta":
            theta = adadelta_run(lambda t: fg(t)[1], theta0, config.adadelta_steps)
            return theta, self.energy(ansatz, theta), True
        if config.optimizer == "smo":
            theta = _smo_exact(ansatz, self, theta0, config.sweeps)
            return theta, self.energy(ansatz, theta), True
        res = bfgs_minimize(fg, theta0, gtol=config.bfgs_gtol)
        return res.theta, res.energy, not res.line_search_failed


def _smo_exact(ansatz, backend, theta0, sweeps):
    return smo_sweep(lambda t: backend.energy(ansatz, t), theta0, sweeps)


class _SinusoidBackend:
    """Shared SMO / screening machinery for the shot-based backends."""

    rng: np.random.Generator

    def optimize(self, ansatz: Ansatz, theta0, config: AdaptConfig):
        if config.optimizer == "bfgs":
            raise ValueError("BFGS needs exact gradients; use smo or adadelta with shots")
        theta = np.array(theta0, dtype=float)
        if config.optimizer == "adadelta":
            grad = lambda t: np.array([  # noqa: E731
                self.energy(ansatz, _shift(t, j, SHIFT)) - self.energy(ansatz, _shift(t, j, -SHIFT))
                for j in range(t.size)])
            theta = adadelta_run(grad, theta, config.adadelta_steps)
        else:
            for _ in range(config.sweeps):
                theta = self.smo_pass(ansatz, theta)
        return theta, self.energy(ansatz, theta), True

    def screen(self, ansatz: Ansatz, theta, pool: OperatorPool, shots: Optional[int] = None) -> np.ndarray:
        return np.array([self.appended_energy(ansatz, theta, p, SHIFT, shots)
                         - self.appended_energy(ansatz, theta, p, -SHIFT, shots) for p in pool])


def _shift(t, j, d):
    t = np.array(t, dtype=float)
    t[j] += d
    return t


class SampledBackend(_SinusoidBackend):
    """Pure-state circuits, ``n_shots`` multinomial samples per group."""

    name = "shots"

    def __init__(self, psi0: np.ndarray, groups: Sequence[CompiledGroup], n_shots: int, seed=None):
        self.psi0 = psi0
        self.n_shots = n_shots
        self.groups = groups
        self.rng = np.random.default_rng(seed)
        dim = psi0.size
        # dense group basis changes: W_g columns are images of basis states
        self._W = [run_gates_matrix(cg, dim) for cg in groups]
        self._D = [cg.diagonal for cg in groups]
        self.evaluations = 0

    def _sample(self, amplitudes_per_group: List[np.ndarray], shots: int) -> float:
        total = 0.0
        for amp, d in zip(amplitudes_per_group, self._D):
            p = np.abs(amp) ** 2
            p = p / p.sum()
            counts = self.rng.multinomial(shots, p)
            total += float(counts @ d) / shots
        self.evaluations += 1
        return total

    def energy(self, ansatz: Ansatz, theta, shots: Optional[int] = None) -> float:
        psi = ansatz.state(theta, self.psi0)
        return self._sample([W @ psi for W in self._W], shots or self.n_shots)

    def appended_energy(self, ansatz, theta, p, angle, shots=None) -> float:
        psi = apply_pauli_rotation(ansatz.state(theta, self.psi0), p, angle)
        return self._sample([W @ psi for W in self._W], shots or self.n_shots)

    def smo_pass(self, ansatz: Ansatz, theta: np.ndarray) -> np.ndarray:
        theta = theta.copy()
        steps = ansatz.steps
        prefix = self.psi0
        for j, s in enumerate(steps):
            if len(s.generator) != 1:
                raise ValueError("SMO needs single-string steps")
            p, w = s.generator[0]
            if w != 1.0:
                raise ValueError("SMO needs unit weights")
            # output = cos(t) u + sin(t) v with u, v propagated through the suffix
            u, v = prefix, -1j * apply_pauli(prefix, p)
            for s2 in steps[j + 1:]:
                u = s2.apply(u, theta[s2.param])
                v = s2.apply(v, theta[s2.param])
            Wu = [W @ u for W in self._W]
            Wv = [W @ v for W in self._W]
            vals = np.array([self._sample([np.cos(t) * a + np.sin(t) * b for a, b in zip(Wu, Wv)], self.n_shots)
                             for t in SMO_MESH])
            a, b, _ = fit_sinusoid(SMO_MESH, vals)
            if a > 1e-12:
                theta[s.param] = _wrap(sinusoid_argmin(a, b))
            prefix = s.apply(prefix, theta[s.param])
        return theta


def run_gates_matrix(cg: CompiledGroup, dim: int) -> np.ndarray:
    """Dense unitary of a group's basis-change circuit."""
    eye = np.eye(dim, dtype=complex)
    if not len(cg.circuit):
        return eye
    return np.column_stack([run_gates(eye[:, k], cg.circuit) for k in range(dim)])


class NoisyBackend(_SinusoidBackend):
    """Density-matrix execution with gate noise; Gaussian shot noise per group."""

    name = "noisy"

    def __init__(self, psi0: np.ndarray, groups: Sequence[CompiledGroup], n_shots: int,
                 noise: NoiseModel, seed=None, noisy_measurement: bool = True):
        self.rho0 = np.outer(psi0, psi0.conj())
        self.n = int(np.log2(psi0.size))
        self.noise = noise
        self.exe = NoisyExecutor(noise, self.n)
        self.n_shots = n_shots
        self.groups = groups
        self.rng = np.random.default_rng(seed)
        meas = self.exe if noisy_measurement else NoisyExecutor(NoiseModel(), self.n)
        # observables D_g and D_g^2 pulled back through each measurement circuit
        self._obs = []
        for cg in groups:
            d = cg.diagonal
            o1 = meas.run_adjoint(np.diag(d).astype(complex), cg.circuit.gates)
            o2 = meas.run_adjoint(np.diag(d * d).astype(complex), cg.circuit.gates)
            self._obs.append((o1, o2))
        self.evaluations = 0

    def _rotation(self, rho, p: PauliTerm, angle: float):
        return self.exe.run(rho, compile_rotation(p, angle))

    def state(self, ansatz: Ansatz, theta) -> np.ndarray:
        rho = self.rho0
        for s in ansatz.steps:
            for p, w in s.generator:
                rho = self._rotation(rho, p, theta[s.param] * w)
        return rho

    def _estimate(self, moments, shots) -> float:
        total = 0.0
        for m1, m2 in moments:
            var = max(m2 - m1 * m1, 0.0)
            total += m1 + np.sqrt(var / shots) * self.rng.standard_normal()
        self.evaluations += 1
        return float(total)

    def _moments(self, rho, obs=None):
        obs = obs or self._obs
        return [(float(np.real(np.vdot(o1, rho))), float(np.real(np.vdot(o2, rho)))) for o1, o2 in obs]

    def exact_energy(self, ansatz: Ansatz, theta) -> float:
        return sum(m1 for m1, _ in self._moments(self.state(ansatz, theta)))

    def energy(self, ansatz: Ansatz, theta, shots: Optional[int] = None) -> float:
        return self._estimate(self._moments(self.state(ansatz, theta)), shots or self.n_shots)

    def appended_energy(self, ansatz, theta, p, angle, shots=None) -> float:
        rho = self._rotation(self.state(ansatz, theta), p, angle)
        return self._estimate(self._moments(rho), shots or self.n_shots)

    def screen(self, ansatz: Ansatz, theta, pool: OperatorPool, shots: Optional[int] = None) -> np.ndarray:
        rho = self.state(ansatz, theta)
        shots = shots or self.n_shots
        out = []
        for p in pool:
            e = [self._estimate(self._moments(self._rotation(rho, p, a)), shots) for a in (SHIFT, -SHIFT)]
            out.append(e[0] - e[1])
        return np.array(out)

    def smo_pass(self, ansatz: Ansatz, theta: np.ndarray) -> np.ndarray:
        theta = theta.copy()
        steps = ansatz.steps
        for s in steps:
            if len(s.generator) != 1 or s.generator[0][1] != 1.0:
                raise ValueError("SMO needs single unit-weight strings")
        # Heisenberg pull-back of the group observables through each suffix
        pulled = [None] * len(steps)
        obs = self._obs
        for j in range(len(steps) - 1, -1, -1):
            pulled[j] = obs
            p = steps[j].generator[0][0]
            gates = compile_rotation(p, theta[steps[j].param]).gates
            obs = [(self.exe.run_adjoint(o1, gates), self.exe.run_adjoint(o2, gates)) for o1, o2 in obs]
        rho = self.rho0
        for j, s in enumerate(steps):
            p = s.generator[0][0]
            r0 = self._rotation(rho, p, 0.0)
            rp = self._rotation(rho, p, np.pi / 4)
            rm = self._rotation(rho, p, -np.pi / 4)
            m0, mp, mm = (self._moments(r, pulled[j]) for r in (r0, rp, rm))
            vals = []
            for t in SMO_MESH:
                c2, s2 = np.cos(2 * t), np.sin(2 * t)
                mom = []
                for (a0, b0), (ap, bp), (am, bm) in zip(m0, mp, mm):
                    # f(t) = A + B cos 2t + C sin 2t from f(0), f(pi/4), f(-pi/4)
                    A1, C1 = (ap + am) / 2, (ap - am) / 2
                    A2, C2 = (bp + bm) / 2, (bp - bm) / 2
                    mom.append((A1 + (a0 - A1) * c2 + C1 * s2, A2 + (b0 - A2) * c2 + C2 * s2))
                vals.append(self._estimate(mom, self.n_shots))
            a, b, _ = fit_sinusoid(SMO_MESH, np.asarray(vals))
            if a > 1e-12:
                theta[s.param] = _wrap(sinusoid_argmin(a, b))
            rho = self._rotation(rho, p, theta[s.param])
        return theta


# ---------------------------------------------------------------- loop

@dataclass
class IterationRecord:
    iteration: int
    n_parameters: int
    generator: Optional[str]
    max_gradient: float
    energy: float
    statevector_energy: float
    energy_error: Optional[float]
    fidelity: Optional[float]
    cnot_count: int
    theta: List[float]
    status: str = "ok"


@dataclass
class RunRecord:
    config_hash: str
    seed: Optional[int]
    iterations: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    final_max_gradient: float = float("nan")
    final_ansatz: Optional[Ansatz] = None

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]

    def to_jsonl(self) -> str:
        lines = []
        for it in self.iterations:
            row = {"config_hash": self.config_hash, "seed": self.seed}
            row.update(asdict(it))
            lines.append(json.dumps(row, sort_keys=True))
        return "\n".join(lines) + "\n"


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def select(scores: np.ndarray, pool: OperatorPool, config: AdaptConfig, rng: np.random.Generator) -> int:
    """Index of the largest ``|score|``; near-ties resolved per ``config.tie_break``."""
    mags = np.abs(scores)
    best = mags.max()
    ties = [k for k in range(len(pool)) if best - mags[k] <= config.tie_tolerance]
    if len(ties) == 1:
        return ties[0]
    if config.tie_break == "seeded_random":
        return int(rng.choice(ties))
    return min(ties, key=lambda k: pool.elements[k].label())


def adapt_vqe(backend, pool: OperatorPool, reference: str, config: AdaptConfig,
              h: QubitOperator, psi0: np.ndarray, exact=None, seed: Optional[int] = None,
              chash: str = "", log=None) -> RunRecord:
    """Run the loop; ``h``/``psi0`` give the statevector re-evaluation of every iterate."""
    rng = np.random.default_rng(seed)
    n_q = psi0.size.bit_length() - 1
    ansatz = Ansatz(n_q, reference)
    theta = np.zeros(0)
    sv = StatevectorBackend(h, psi0)
    record = RunRecord(chash, seed)

    def log_iteration(k, gen, gmax, energy, status="ok"):
        psi = ansatz.state(theta, psi0)
        e_sv = float(np.real(np.vdot(psi, sv.H @ psi)))
        it = IterationRecord(
            iteration=k, n_parameters=ansatz.n_parameters, generator=gen, max_gradient=float(gmax),
            energy=float(energy), statevector_energy=e_sv,
            energy_error=None if exact is None else e_sv - exact.energy,
            fidelity=None if exact is None else float(abs(np.vdot(exact.vector, psi)) ** 2),
            cnot_count=ansatz.cnot_count(), theta=[float(t) for t in theta], status=status)
        record.iterations.append(it)
        if log is not None:
            log(it)

    energy0 = backend.energy(ansatz, theta)
    k = 0
    while True:
        if isinstance(backend, StatevectorBackend):
            scores = backend.screen(ansatz, theta, pool)
        else:
            scores = backend.screen(ansatz, theta, pool, config.screening_shots)
        gmax = float(np.abs(scores).max())
        record.final_max_gradient = gmax
        if k == 0:
            log_iteration(0, None, gmax, energy0)
        if gmax < config.grad_tolerance:
            record.converged, record.stop_reason = True, "gradient"
            break
        if ansatz.n_parameters >= config.max_parameters:
            record.stop_reason = "budget"
            break
        pick = select(scores, pool, config, rng)
        p = pool.elements[pick]
        ansatz = ansatz.appended(p)
        theta = np.append(theta, 0.0)
        try:
            theta, energy, ok = backend.optimize(ansatz, theta, config)
        except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
            k += 1
            log_iteration(k, p.label(), gmax, float("nan"), status=f"optimizer failure: {exc}")
            record.stop_reason = "optimizer failure"
            break
        k += 1
        log_iteration(k, p.label(), gmax, energy, "ok" if ok else "line search failed")
    record.final_ansatz = ansatz
    return record


def certify_pool(pool: OperatorPool, h: QubitOperator, psi0: np.ndarray, exact, tol: float = 1e-5,
                 config: Optional[AdaptConfig] = None) -> bool:
    """True when statevector ADAPT on ``pool`` reaches ``exact`` to ``tol``."""
    rec = adapt_vqe(StatevectorBackend(h, psi0), pool, "product_I", config or AdaptConfig(), h, psi0, exact=exact)
    return rec.converged and rec.final.energy_error < tol
