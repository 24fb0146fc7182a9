"""Qubit-ADAPT (HC pool) under amplitude-damping plus dephasing gate noise."""

import argparse

from impvqe import studies

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--p2", type=float, nargs="+", default=[1e-4, 1e-3, 1e-2])
ap.add_argument("--p1", type=float, default=1e-4)
ap.add_argument("--shots", type=int, default=1 << 16)
ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
ap.add_argument("--budget", type=int, default=studies.NOISY_BUDGET)
ap.add_argument("--out", default="results/gate_noise.csv")
args = ap.parse_args()

curves = []
for p2 in args.p2:
    for seed in args.seeds:
        rec = studies.gate_noise_run(p2, seed, args.budget, args.p1, args.shots)
        curves += [dict(p1=args.p1, p2=p2, seed=seed, n_theta=it.n_parameters, noisy_energy=it.energy,
                        delta_e=it.energy_error, fidelity=it.fidelity) for it in rec.iterations]
        fs = [it.fidelity for it in rec.iterations]
        print(f"p2={p2:.0e} seed={seed} final f={fs[-1]:.4f} max f={max(fs):.4f}", flush=True)
studies.write_csv(args.out, curves)
