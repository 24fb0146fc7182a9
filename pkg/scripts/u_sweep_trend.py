"""Parameters needed by statevector qubit-ADAPT (HC) to reach 1e-3 across U."""

import argparse

import numpy as np

from impvqe import studies

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--start", type=float, default=0.5)
ap.add_argument("--stop", type=float, default=8.0)
ap.add_argument("--step", type=float, default=0.5)
ap.add_argument("--target", type=float, default=1e-3)
ap.add_argument("--out", default="results/u_sweep.csv")
args = ap.parse_args()

rows = []
for U in np.arange(args.start, args.stop + 1e-9, args.step):
    r = studies.n_theta_at_accuracy(round(float(U), 10), args.target)
    rows.append(r)
    print(f"U={r['U']:4.1f} N_theta(dE<{args.target:g})={r['n_theta']} "
          f"N_theta(1-f<{args.target:g})={r['n_theta_fidelity']}", flush=True)
studies.write_csv(args.out, rows)
