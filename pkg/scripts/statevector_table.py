"""Statevector comparison of UCCSD, HVA and qubit-ADAPT (HC, sUCCSpD pools)."""

import argparse

from impvqe import studies

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--preset", default="e_g", choices=["e_g", "t_2g"])
ap.add_argument("--pools", nargs="+", default=["hc", "succspd"])
ap.add_argument("--out", default="results/statevector_{preset}.csv")
args = ap.parse_args()

rows = studies.fixed_ansatz_rows(args.preset) + studies.adapt_rows(args.pools, args.preset)
for r in rows:
    print(f"{r['ansatz']:>10} {r['pool']:>8} N_theta={r['n_theta']:4d} N_cx={r['n_cx']:5d} "
          f"dE={r['delta_e']:.3e} 1-f={r['infidelity']:.3e}")
studies.write_csv(args.out.format(preset=args.preset), rows)
