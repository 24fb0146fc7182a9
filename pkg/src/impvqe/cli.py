"""Command-line runner.

Verbs::

    impvqe run CONFIG.yaml [--out DIR]
    impvqe report RUN_DIR [RUN_DIR ...] [--out table.csv] [--convergence conv.csv]
    impvqe pools [--preset e_g] [--list]
    impvqe oracle [--preset e_g]

Exit status: 0 success, 1 configuration error, 2 runtime failure.
See ``README.md`` for the config grammar and the output schema.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import ansatz as az
from .adapt import (AdaptConfig, NoisyBackend, SampledBackend, StatevectorBackend, adapt_vqe, config_hash)
from .measure import compile_groups, double_factorize
from .mitigate import ReadoutModel, mitigation_pipeline
from .model import (REFERENCES, ImpurityModel, PRESETS, mo_qubit_hamiltonian, preset, qubit_hamiltonian,
                    reference_state)
from .oracle import exact_ground_state, fidelity, sector_basis
from .simulator import NoiseModel, to_density

SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ["config_hash", "seed", "ansatz", "pool", "mode", "shots", "p1", "p2", "optimizer",
                   "n_theta", "n_cx", "energy", "e_gs", "delta_e", "infidelity", "converged", "stop_reason"]
REPORT_COLUMNS = ["run", "config_hash", "seed", "ansatz", "pool", "n_theta", "n_cx", "delta_e", "infidelity",
                  "mode", "shots", "p2"]
MITIGATION_COLUMNS = ["config_hash", "seed", "scale", "n_gates", "raw", "raw_stderr", "filtered",
                      "filtered_stderr", "discard_fraction", "mean_ne_deviation", "mean_sz_deviation"]
POOLS = ("uccsd", "succspd", "hc", "z_stripped", "mcp")
ANSATZE = ("adapt", "uccsd", "hva", "published")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- config

def _line_index(text: str) -> Dict[Tuple[str, ...], int]:
    """1-based source line of every mapping key, by key path."""
    out: Dict[Tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    walk(yaml.compose(text), ())
    return out


@dataclass
class RunConfig:
    model: ImpurityModel
    model_spec: Dict[str, Any]
    ansatz: str = "adapt"
    pool: Optional[str] = "hc"
    reference: str = "product_I"
    layers: int = 4
    partition: str = "five"
    mode: str = "statevector"
    shots: Optional[int] = None
    p1: float = 0.0
    p2: float = 0.0
    noisy_measurement: bool = True
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    zne: bool = False
    scales: Tuple[float, ...] = (1.0, 2.0, 3.0)
    symmetry_filter: bool = True
    readout: Optional[Tuple[float, float]] = None
    mitigation_shots: Optional[int] = None
    seeds: Tuple[int, ...] = (0,)
    output: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def hash(self) -> str:
        body = {k: v for k, v in self.raw.items() if k != "output"}
        return config_hash(body)


_SECTIONS = {
    "model": {"preset", "M", "eps", "lam", "delta", "U", "J", "n_e", "two_sz"},
    "ansatz": {"kind", "pool", "reference", "layers", "partition"},
    "execution": {"mode", "shots", "p1", "p2", "noisy_measurement"},
    "optimizer": {"name", "sweeps", "adadelta_steps", "gtol"},
    "adapt": {"grad_tolerance", "max_parameters", "screening_shots", "tie_break", "tie_tolerance"},
    "mitigation": {"zne", "scales", "symmetry_filter", "readout", "shots"},
    "seeds": None,
    "output": None,
}


def parse_config(text: str) -> RunConfig:
    """Validate a YAML run config; errors name the offending line."""
    try:
        raw = yaml.safe_load(text)
        lines = _line_index(text) if raw else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(raw, dict):
        raise ConfigError("line 1: config must be a mapping of sections")

    def fail(path: Tuple[str, ...], msg: str):
        line = lines.get(path) or lines.get(path[:1]) or 1
        raise ConfigError(f"line {line}: {'.'.join(path)}: {msg}")

    for key, val in raw.items():
        if key not in _SECTIONS:
            fail((key,), f"unknown section; expected one of {sorted(_SECTIONS)}")
        allowed = _SECTIONS[key]
        if allowed is not None:
            if not isinstance(val, dict):
                fail((key,), "must be a mapping")
            for sub in val:
                if sub not in allowed:
                    fail((key, sub), f"unknown key; expected one of {sorted(allowed)}")

    def get(section, key, default, kind=None, choices=None):
        val = raw.get(section, {}).get(key, default)
        if val is None:
            return None
        if kind is not None:
            try:
                if kind is bool and not isinstance(val, bool):
                    raise ValueError
                val = kind(val)
            except (TypeError, ValueError):
                fail((section, key), f"expected {kind.__name__}, got {val!r}")
        if choices is not None and val not in choices:
            fail((section, key), f"must be one of {list(choices)}, got {val!r}")
        return val

    # model
    mspec = dict(raw.get("model", {"preset": "e_g"}))
    try:
        if "preset" in mspec:
            name = get("model", "preset", "e_g", str, tuple(PRESETS))
            overrides = {k: v for k, v in mspec.items() if k != "preset"}
            model = preset(name).with_(**overrides)
        else:
            missing = {"M", "eps", "lam", "delta", "U", "J"} - set(mspec)
            if missing:
                fail(("model",), f"missing {sorted(missing)} (or give a preset)")
            model = ImpurityModel(**mspec)
        model.encoding()
    except (TypeError, ValueError) as exc:
        fail(("model",), str(exc))

    cfg = RunConfig(model=model, model_spec=mspec, raw=raw)
    cfg.ansatz = get("ansatz", "kind", "adapt", str, ANSATZE)
    cfg.pool = get("ansatz", "pool", "hc" if cfg.ansatz == "adapt" else None, str, POOLS + (None,))
    if cfg.ansatz == "adapt" and cfg.pool is None:
        fail(("ansatz", "pool"), "adapt needs a pool")
    if cfg.ansatz != "adapt" and "pool" in raw.get("ansatz", {}):
        fail(("ansatz", "pool"), f"pool only applies to adapt, not {cfg.ansatz}")
    default_ref = {"uccsd": "hartree_fock"}.get(cfg.ansatz, "product_I")
    cfg.reference = get("ansatz", "reference", default_ref, str, REFERENCES)
    cfg.layers = get("ansatz", "layers", 4, int)
    if cfg.layers < 1:
        fail(("ansatz", "layers"), "must be >= 1")
    cfg.partition = get("ansatz", "partition", "five", str, ("five", "four"))
    if cfg.ansatz == "published" and cfg.model.M != 2:
        fail(("ansatz", "kind"), "the published circuit is for the e_g model (M=2)")

    cfg.mode = get("execution", "mode", "statevector", str, ("statevector", "shots", "noisy"))
    cfg.shots = get("execution", "shots", None if cfg.mode == "statevector" else 1 << 14, int)
    if cfg.mode != "statevector" and (cfg.shots is None or cfg.shots < 1):
        fail(("execution", "shots"), "must be a positive integer")
    cfg.p1 = get("execution", "p1", 0.0, float)
    cfg.p2 = get("execution", "p2", 0.0, float)
    for k in ("p1", "p2"):
        if not 0 <= getattr(cfg, k) <= 1:
            fail(("execution", k), "must lie in [0, 1]")
    if cfg.mode != "noisy" and (cfg.p1 or cfg.p2):
        fail(("execution", "mode"), "p1/p2 need mode: noisy")
    cfg.noisy_measurement = get("execution", "noisy_measurement", True, bool)

    opt_default = "bfgs" if cfg.mode == "statevector" else "smo"
    opt = get("optimizer", "name", opt_default, str, ("bfgs", "smo", "adadelta"))
    if opt == "bfgs" and cfg.mode != "statevector":
        fail(("optimizer", "name"), "bfgs needs exact gradients (mode: statevector)")
    if cfg.mode != "statevector" and cfg.reference == "hartree_fock":
        fail(("ansatz", "reference"), "measurement groups are built in the site basis; use product_I or "
                                      "noninteracting_II with shot-based modes")
    if cfg.mode != "statevector" and cfg.ansatz in ("uccsd", "hva"):
        fail(("ansatz", "kind"), f"{cfg.ansatz} has multi-string steps; shot-based modes need adapt or published")
    try:
        cfg.adapt = AdaptConfig(
            grad_tolerance=get("adapt", "grad_tolerance", 1e-4, float),
            max_parameters=get("adapt", "max_parameters", 60, int),
            optimizer=opt,
            sweeps=get("optimizer", "sweeps", 40, int),
            adadelta_steps=get("optimizer", "adadelta_steps", 250, int),
            screening_shots=get("adapt", "screening_shots", 1 << 16, int),
            tie_break=get("adapt", "tie_break", "lexicographic", str),
            tie_tolerance=get("adapt", "tie_tolerance", 1e-9, float),
            bfgs_gtol=get("optimizer", "gtol", 1e-8, float))
    except ValueError as exc:
        fail(("adapt",), str(exc))

    cfg.zne = get("mitigation", "zne", False, bool)
    cfg.symmetry_filter = get("mitigation", "symmetry_filter", True, bool)
    sc = raw.get("mitigation", {}).get("scales", [1, 2, 3])
    if not isinstance(sc, list) or len(set(sc)) < 3 or any(not isinstance(s, (int, float)) or s < 1 for s in sc):
        fail(("mitigation", "scales"), "need at least 3 distinct scales >= 1")
    cfg.scales = tuple(float(s) for s in sc)
    ro = raw.get("mitigation", {}).get("readout")
    if ro is not None:
        if not (isinstance(ro, list) and len(ro) == 2 and all(isinstance(x, (int, float)) and 0 <= x <= 1
                                                             for x in ro)):
            fail(("mitigation", "readout"), "expected [p01, p10] flip probabilities")
        cfg.readout = (float(ro[0]), float(ro[1]))
    cfg.mitigation_shots = get("mitigation", "shots", None, int)
    if (cfg.zne or ro is not None) and cfg.mode != "noisy":
        fail(("mitigation",), "mitigation needs mode: noisy")

    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
        fail(("seeds",), "expected a non-negative integer or a list of them")
    cfg.seeds = tuple(seeds)
    cfg.output = raw.get("output")
    if cfg.output is not None and not isinstance(cfg.output, str):
        fail(("output",), "expected a directory path")
    return cfg


# ---------------------------------------------------------------- run

def _build_pool(name: str, m: ImpurityModel, h):
    if name == "uccsd":
        return az.pool_uccsd(m)
    if name == "succspd":
        return az.pool_succspd(m)
    if name == "hc":
        return az.pool_hc(h)
    stripped = az.strip_z(az.pool_hc(h))
    return stripped if name == "z_stripped" else az.pool_mcp(stripped)


def _fixed_ansatz(cfg: RunConfig):
    m = cfg.model
    if cfg.ansatz == "uccsd":
        a = az.build_uccsd(m)
        return a, np.zeros(a.n_parameters)
    if cfg.ansatz == "hva":
        a = az.build_hva(m, cfg.layers, partition=cfg.partition)
        return a, np.full(a.n_parameters, az.HVA_INIT)
    a = az.published_eg_ansatz()
    return a, np.zeros(a.n_parameters)


def _library_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _csv_text(columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def execute(cfg: RunConfig, out_dir: Path, log=None) -> List[Dict[str, Any]]:
    m = cfg.model
    spec = m.encoding()
    # the mean-field reference is a determinant of molecular orbitals
    h = mo_qubit_hamiltonian(m) if cfg.reference == "hartree_fock" else qubit_hamiltonian(m)
    exact = exact_ground_state(h, sector_basis(spec))
    psi0 = reference_state(cfg.reference, m)
    chash = cfg.hash
    groups = compile_groups(double_factorize(m), spec) if cfg.mode != "statevector" else None
    pool = _build_pool(cfg.pool, m, h) if cfg.ansatz == "adapt" else None

    out_dir.mkdir(parents=True, exist_ok=True)
    summary, jsonl, mitig = [], [], []
    for seed in cfg.seeds:
        if cfg.mode == "statevector":
            backend = StatevectorBackend(h, psi0)
        elif cfg.mode == "shots":
            backend = SampledBackend(psi0, groups, cfg.shots, seed=seed)
        else:
            backend = NoisyBackend(psi0, groups, cfg.shots, NoiseModel(cfg.p1, cfg.p2), seed=seed,
                                   noisy_measurement=cfg.noisy_measurement)
        if cfg.ansatz == "adapt":
            rec = adapt_vqe(backend, pool, cfg.reference, cfg.adapt, h, psi0, exact=exact, seed=seed,
                            chash=chash, log=log)
            ansatz, theta = rec.final_ansatz, np.array(rec.final.theta)
            energy, converged, stop = rec.final.energy, rec.converged, rec.stop_reason
            jsonl.append(rec.to_jsonl())
        else:
            ansatz, theta0 = _fixed_ansatz(cfg)
            theta, energy, ok = backend.optimize(ansatz, theta0, cfg.adapt)
            converged, stop = ok, "optimized" if ok else "line search failed"
        psi = ansatz.state(theta, psi0)
        e_sv = ansatz.energy(theta, psi0, h)
        summary.append(dict(
            config_hash=chash, seed=seed, ansatz=cfg.ansatz, pool=cfg.pool or "", mode=cfg.mode,
            shots=cfg.shots, p1=cfg.p1, p2=cfg.p2, optimizer=cfg.adapt.optimizer,
            n_theta=ansatz.n_parameters, n_cx=ansatz.cnot_count(), energy=float(energy), e_gs=exact.energy,
            delta_e=e_sv - exact.energy, infidelity=1 - fidelity(psi, exact.vector),
            converged=bool(converged), stop_reason=stop))
        (out_dir / f"ansatz_seed{seed}.txt").write_text(f"# config_hash {chash}\n" + az.dumps(ansatz, theta))
        if cfg.zne or cfg.readout is not None:
            readout = ReadoutModel.uniform(spec.n_qubits, *cfg.readout) if cfg.readout else None
            res = mitigation_pipeline(ansatz.gates(theta), to_density(psi0), groups, spec,
                                      NoiseModel(cfg.p1, cfg.p2), cfg.mitigation_shots or cfg.shots,
                                      cfg.scales if cfg.zne else (1.0,) * 3, seed=seed, readout=readout)
            for p in res.points:
                row = dict(config_hash=chash, seed=seed, **p.__dict__)
                if not cfg.symmetry_filter:
                    row.update(filtered=None, filtered_stderr=None)
                mitig.append(row)
            summary[-1].update(zne_raw=res.zne_raw[0], zne_raw_stderr=res.zne_raw[1])
            if cfg.symmetry_filter:
                summary[-1].update(zne_filtered=res.zne_filtered[0], zne_filtered_stderr=res.zne_filtered[1])

    manifest = dict(schema_version=SCHEMA_VERSION, config_hash=chash, config=cfg.raw, seeds=list(cfg.seeds),
                    library_version=_library_version(), e_gs=exact.energy, gap=exact.gap,
                    model=m.to_dict())
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    columns = SUMMARY_COLUMNS + ([c for c in ("zne_raw", "zne_raw_stderr", "zne_filtered", "zne_filtered_stderr")]
                                 if mitig else [])
    (out_dir / "summary.csv").write_text(_csv_text(columns, summary))
    if jsonl:
        (out_dir / "iterations.jsonl").write_text("".join(jsonl))
    if mitig:
        (out_dir / "mitigation.csv").write_text(_csv_text(MITIGATION_COLUMNS, mitig))
    return summary


# ---------------------------------------------------------------- report

def _read_run(d: Path) -> Tuple[dict, List[dict], List[dict]]:
    try:
        manifest = json.loads((d / "manifest.json").read_text())
        rows = list(csv.DictReader(io.StringIO((d / "summary.csv").read_text())))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{d}: missing or corrupt run record ({exc})") from None
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{d}: schema version {manifest.get('schema_version')} != {SCHEMA_VERSION}")
    if not rows or any(r.get("config_hash") != manifest["config_hash"] for r in rows):
        raise ConfigError(f"{d}: summary rows do not match the manifest config hash")
    iters = []
    p = d / "iterations.jsonl"
    if p.exists():
        try:
            iters = [json.loads(ln) for ln in p.read_text().splitlines() if ln.strip()]
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: corrupt iteration log ({exc})") from None
    return manifest, rows, iters


def report(dirs: Sequence[Path]) -> Tuple[str, str]:
    """Merged summary table and per-iteration convergence data."""
    if not dirs:
        raise ConfigError("report needs at least one run directory")
    table, conv = [], []
    for d in dirs:
        _, rows, iters = _read_run(d)
        for r in rows:
            table.append(dict(r, run=str(d)))
        for it in iters:
            conv.append(dict(run=str(d), config_hash=it["config_hash"], seed=it["seed"],
                             iteration=it["iteration"], n_parameters=it["n_parameters"],
                             n_cx=it["cnot_count"], energy=it["energy"],
                             delta_e=it["energy_error"], infidelity=None if it["fidelity"] is None
                             else 1 - it["fidelity"]))
    conv_cols = ["run", "config_hash", "seed", "iteration", "n_parameters", "n_cx", "energy", "delta_e",
                 "infidelity"]
    return _csv_text(REPORT_COLUMNS, table), _csv_text(conv_cols, conv)


# ---------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="impvqe", description="VQE studies of multi-orbital impurity models.")
    sub = ap.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="execute a YAML run config")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, help="output directory (overrides the config's 'output')")
    r.add_argument("--quiet", action="store_true", help="no per-iteration progress lines")
    rp = sub.add_parser("report", help="merge run directories into comparison tables")
    rp.add_argument("runs", type=Path, nargs="+")
    rp.add_argument("--out", type=Path, help="summary table CSV (default: stdout)")
    rp.add_argument("--convergence", type=Path, help="per-iteration convergence CSV")
    p = sub.add_parser("pools", help="operator pool sizes, optionally with members")
    p.add_argument("--preset", default="e_g", choices=sorted(PRESETS))
    p.add_argument("--list", action="store_true", help="print every pool member")
    p.add_argument("--pools", nargs="+", default=list(POOLS), choices=POOLS)
    o = sub.add_parser("oracle", help="exact ground energy, gap and reference fidelities")
    o.add_argument("--preset", default="e_g", choices=sorted(PRESETS))
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "run":
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
            cfg = parse_config(text)
            out = args.out or (Path(cfg.output) if cfg.output else None)
            if out is None:
                raise ConfigError("no output directory: set 'output' or pass --out")
            log = None if args.quiet else (lambda it: print(
                f"iter {it.iteration:3d} N={it.n_parameters:3d} cx={it.cnot_count:4d} "
                f"|g|={it.max_gradient:.2e} dE={it.energy_error:.3e} f={it.fidelity:.5f}", file=sys.stderr))
            rows = execute(cfg, out, log)
            print(_csv_text(SUMMARY_COLUMNS, rows), end="")
        elif args.verb == "report":
            table, conv = report(args.runs)
            if args.out:
                args.out.write_text(table)
            else:
                print(table, end="")
            if args.convergence:
                args.convergence.write_text(conv)
        elif args.verb == "pools":
            m = preset(args.preset)
            h = qubit_hamiltonian(m)
            for name in args.pools:
                pool = _build_pool(name, m, h)
                print(f"{name}\t{len(pool)}")
                if args.list:
                    for p in pool:
                        print(f"  {p.label()}")
        elif args.verb == "oracle":
            m = preset(args.preset)
            spec = m.encoding()
            h = qubit_hamiltonian(m)
            ex = exact_ground_state(h, sector_basis(spec))
            print(f"preset\t{args.preset}\nE_GS\t{ex.energy!r}\ngap\t{ex.gap!r}")
            ex_mo = exact_ground_state(mo_qubit_hamiltonian(m), sector_basis(spec))
            for ref in REFERENCES:
                target = ex_mo if ref == "hartree_fock" else ex
                print(f"fidelity[{ref}]\t{fidelity(reference_state(ref, m), target.vector):.6f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
