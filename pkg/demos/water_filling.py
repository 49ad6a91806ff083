"""Reverse water-filling on a toy 3-cell block.

Walks through one rate-distortion design by hand: which components get
information, how much, and what the quantizer steps come out as.

    python demos/water_filling.py
"""

import numpy as np

from ratemap.rdcomp import bitrate_direct, reverse_water_filling, rsd

p_plus = np.diag([4.0, 1.0, 0.25])  # Seeker covariance on the Supporter's FOV
w = np.eye(3)                        # path weights, all cells equally relevant

for alpha in (0.1, 1.0, 4.0, 10.0):
    sol = reverse_water_filling(w, p_plus, alpha)
    print(f"alpha={alpha:5.1f}  water level={alpha / 2:5.2f}  "
          f"levels={np.round(sol.phi, 3)}  rank={sol.rank}  bits={sol.bitrate_bits:.3f}")

# Every component whose variance sits above the water level is sent; the
# rest stay silent.  At alpha=1 the level is 0.5, so only the first two go.
sol = reverse_water_filling(w, p_plus, 1.0)
theta, lam = rsd(sol.m)
deltas = np.sqrt(12.0 / lam)
print("\nalpha=1 plan")
print("  basis rows:\n", np.round(theta, 3))
print("  quantizer steps:", np.round(deltas, 4))
print("  posterior variances:", np.round(np.diag(sol.p_bb_next), 4))
print(f"  rate closed form {sol.bitrate_nats:.6f} nats, from the plan {bitrate_direct(theta, deltas, p_plus):.6f}")
