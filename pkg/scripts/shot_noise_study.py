"""Qubit-ADAPT with sampled energies (SMO) across shot budgets and seeds."""

import argparse

from impvqe import studies

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--shots", type=int, nargs="+", default=[1 << 10, 1 << 12, 1 << 14, 1 << 16])
ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
ap.add_argument("--pool", default="hc", choices=["hc", "z_stripped", "mcp", "uccsd", "succspd"])
ap.add_argument("--optimizer", default="smo", choices=["smo", "adadelta"])
ap.add_argument("--budget", type=int, default=studies.NOISY_BUDGET)
ap.add_argument("--out", default="results/shot_noise_{pool}.csv")
args = ap.parse_args()

rows, curves = [], []
for shots in args.shots:
    for seed in args.seeds:
        rec = studies.shot_noise_run(shots, seed, args.budget, args.pool, args.optimizer)
        f = rec.final
        rows.append(dict(pool=args.pool, shots=shots, seed=seed, n_theta=f.n_parameters, n_cx=f.cnot_count,
                         sampled_energy=f.energy, delta_e=f.energy_error, infidelity=1 - f.fidelity))
        curves += [dict(shots=shots, seed=seed, n_theta=it.n_parameters, sampled_energy=it.energy,
                        delta_e=it.energy_error, infidelity=1 - it.fidelity) for it in rec.iterations]
        print(f"shots={shots:6d} seed={seed} dE={f.energy_error:.3e} f={f.fidelity:.5f}", flush=True)
out = args.out.format(pool=args.pool)
studies.write_csv(out, rows)
studies.write_csv(out.replace(".csv", "_curves.csv"), curves)
for shots in args.shots:
    sel = [r for r in rows if r["shots"] == shots]
    print(f"median shots={shots}: dE={studies.median(r['delta_e'] for r in sel):.3e} "
          f"1-f={studies.median(r['infidelity'] for r in sel):.3e}")
