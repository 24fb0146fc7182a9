"""Reoptimize the shipped 32-generator e_g circuit on the statevector."""

from impvqe import studies

r = studies.published_replay()
print(f"N_theta={r['n_theta']} N_cx={r['n_cx']} dE={r['delta_e']:.3e} 1-f={r['infidelity']:.3e}")
