"""Study drivers shared by ``scripts/`` and the acceptance tests.

Each driver returns plain rows (dicts) so callers can write CSV or assert.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import ansatz as az
from .adapt import AdaptConfig, NoisyBackend, SampledBackend, StatevectorBackend, adapt_vqe
from .measure import compile_groups, double_factorize
from .mitigate import mitigation_pipeline
from .model import ImpurityModel, mo_qubit_hamiltonian, preset, qubit_hamiltonian, reference_state, u_sweep
from .optim import bfgs_minimize
from .oracle import exact_ground_state, fidelity, sector_basis
from .simulator import NoiseModel, to_density

# shot-based runs never reach |g| < 1e-4, so they stop at a parameter budget
NOISY_BUDGET = 40


@dataclass
class Problem:
    model: ImpurityModel
    h: object
    exact: object
    psi0: np.ndarray

    @property
    def spec(self):
        return self.model.encoding()


@lru_cache(maxsize=None)
def problem(name: str = "e_g", reference: str = "product_I", basis: str = "site") -> Problem:
    m = preset(name)
    return _problem(m, reference, basis)


def _problem(m: ImpurityModel, reference: str = "product_I", basis: str = "site") -> Problem:
    h = mo_qubit_hamiltonian(m) if basis == "mo" else qubit_hamiltonian(m)
    exact = exact_ground_state(h, sector_basis(m.encoding()))
    return Problem(m, h, exact, reference_state(reference, m))


def pool(name: str, pb: Problem) -> az.OperatorPool:
    if name == "uccsd":
        return az.pool_uccsd(pb.model)
    if name == "succspd":
        return az.pool_succspd(pb.model)
    if name == "hc":
        return az.pool_hc(pb.h)
    stripped = az.strip_z(az.pool_hc(pb.h))
    if name == "z_stripped":
        return stripped
    if name == "mcp":
        return az.pool_mcp(stripped)
    raise ValueError(f"unknown pool {name!r}")


# excitation pools are built on molecular orbitals around the mean-field determinant
EXCITATION_POOLS = ("uccsd", "succspd")


def pool_problem(pool_name: str, name: str = "e_g") -> Problem:
    if pool_name in EXCITATION_POOLS:
        return problem(name, "hartree_fock", "mo")
    return problem(name)


def statevector_adapt(pool_name: str, pb: Optional[Problem] = None, config: Optional[AdaptConfig] = None):
    pb = pb or pool_problem(pool_name)
    config = config or AdaptConfig()
    ref = "hartree_fock" if pool_name in EXCITATION_POOLS else "product_I"
    return adapt_vqe(StatevectorBackend(pb.h, pb.psi0), pool(pool_name, pb), ref, config, pb.h, pb.psi0,
                     exact=pb.exact)


def fixed_ansatz_rows(name: str = "e_g") -> List[Dict]:
    """UCCSD (mean-field reference) and HVA (uniform start) after BFGS."""
    rows = []
    pb = problem(name, "hartree_fock", "mo")
    a = az.build_uccsd(pb.model)
    r = bfgs_minimize(lambda t: a.energy_and_gradient(t, pb.psi0, pb.h), np.zeros(a.n_parameters))
    rows.append(_row("uccsd", "", a, r.theta, pb))
    pb = problem(name)
    for layers in range(1, 6):
        a = az.build_hva(pb.model, layers)
        r = bfgs_minimize(lambda t: a.energy_and_gradient(t, pb.psi0, pb.h), np.full(a.n_parameters, az.HVA_INIT))
        rows.append(_row(f"hva_L{layers}", "", a, r.theta, pb))
    return rows


def _row(ansatz: str, pool_name: str, a: az.Ansatz, theta, pb: Problem, **extra) -> Dict:
    psi = a.state(theta, pb.psi0)
    e = a.energy(theta, pb.psi0, pb.h)
    return dict(ansatz=ansatz, pool=pool_name, n_theta=a.n_parameters, n_cx=a.cnot_count(),
                delta_e=e - pb.exact.energy, infidelity=1 - fidelity(psi, pb.exact.vector), **extra)


def adapt_rows(pools: Sequence[str], name: str = "e_g") -> List[Dict]:
    rows = []
    for p in pools:
        pb = pool_problem(p, name)
        rec = statevector_adapt(p, pb)
        rows.append(_row("adapt", p, rec.final_ansatz, np.array(rec.final.theta), pb,
                         converged=rec.converged, pool_size=len(pool(p, pb))))
    return rows


def published_replay() -> Dict:
    pb = problem()
    a = az.published_eg_ansatz()
    r = bfgs_minimize(lambda t: a.energy_and_gradient(t, pb.psi0, pb.h), np.zeros(a.n_parameters))
    return dict(_row("published", "", a, r.theta, pb), theta=r.theta)


# ---------------------------------------------------------------- sampling

def shot_noise_run(shots: int, seed: int, budget: int = NOISY_BUDGET, pool_name: str = "hc",
                   optimizer: str = "smo", log=None):
    pb = problem()
    groups = compile_groups(double_factorize(pb.model), pb.spec)
    backend = SampledBackend(pb.psi0, groups, shots, seed=seed)
    cfg = AdaptConfig(optimizer=optimizer, max_parameters=budget)
    return adapt_vqe(backend, pool(pool_name, pb), "product_I", cfg, pb.h, pb.psi0, exact=pb.exact, seed=seed,
                     log=log)


def gate_noise_run(p2: float, seed: int, budget: int = NOISY_BUDGET, p1: float = 1e-4, shots: int = 1 << 16,
                   log=None):
    pb = problem()
    groups = compile_groups(double_factorize(pb.model), pb.spec)
    backend = NoisyBackend(pb.psi0, groups, shots, NoiseModel(p1, p2), seed=seed)
    cfg = AdaptConfig(optimizer="smo", max_parameters=budget)
    return adapt_vqe(backend, pool("hc", pb), "product_I", cfg, pb.h, pb.psi0, exact=pb.exact, seed=seed, log=log)


def mitigation_run(seed: int, p2: float = 1e-3, p1: float = 1e-4, shots: int = 1 << 16, scales=(1, 2, 3)) -> Dict:
    """Mitigation on the optimized published circuit; errors relative to E_GS."""
    pb = problem()
    rep = published_replay()
    a = az.published_eg_ansatz()
    groups = compile_groups(double_factorize(pb.model), pb.spec)
    res = mitigation_pipeline(a.gates(rep["theta"]), to_density(pb.psi0), groups, pb.spec, NoiseModel(p1, p2),
                              shots, scales, seed=seed)
    e0 = pb.exact.energy
    first = res.points[0]
    return dict(seed=seed, p2=p2, raw_error=first.raw - e0, filtered_error=first.filtered - e0,
                discard_fraction=first.discard_fraction, zne_error=res.zne_raw[0] - e0,
                zne_stderr=res.zne_raw[1], zne_filtered_error=res.zne_filtered[0] - e0,
                zne_filtered_stderr=res.zne_filtered[1],
                **{f"raw_error_x{p.scale:g}": p.raw - e0 for p in res.points})


# ---------------------------------------------------------------- U sweep

def n_theta_at_accuracy(U: float, target: float = 1e-3, base: str = "e_g", max_parameters: int = 60) -> Dict:
    """Smallest ADAPT-HC parameter count whose error drops below ``target``
    for the ``u_sweep`` model at this ``U``."""
    m = next(x for x in u_sweep(base, U, U) if abs(x.U - U) < 1e-9)
    pb = _problem(m)
    cfg = AdaptConfig(max_parameters=max_parameters)
    rec = adapt_vqe(StatevectorBackend(pb.h, pb.psi0), pool("hc", pb), "product_I", cfg, pb.h, pb.psi0,
                    exact=pb.exact)
    hit = next((it.n_parameters for it in rec.iterations if it.energy_error < target), None)
    hit_f = next((it.n_parameters for it in rec.iterations if 1 - it.fidelity < target), None)
    return dict(U=U, n_theta=hit, n_theta_fidelity=hit_f, final_n_theta=rec.final.n_parameters,
                final_error=rec.final.energy_error, initial_fidelity=rec.iterations[0].fidelity)


def write_csv(path, rows: Sequence[Dict]) -> None:
    """Rows to CSV; columns are the union of keys in first-seen order."""
    import csv
    from pathlib import Path

    cols: List[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def median(values) -> float:
    return float(np.median(np.asarray(list(values), dtype=float)))
