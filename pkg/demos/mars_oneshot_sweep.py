"""One-shot transmission of the bundled Mars crop across alpha.

Prints the rank ratio and error ratio curves and writes the posterior maps of
the sweep under ``demo_out/mars``.

    python demos/mars_oneshot_sweep.py
"""

from pathlib import Path

import numpy as np

from ratemap.sim import load_config, load_world, prior_belief, run_oneshot

cfg = load_config("mars")
world = load_world(cfg)
out = Path("demo_out/mars")
print(f"map {world.shape}, d={world.size}, tau={cfg.tau}")

print(f"{'alpha':>10} {'rank/d':>8} {'err ratio':>10} {'bits':>10}")
for i, alpha in enumerate(np.logspace(-6, -1, 12)):
    res = run_oneshot(cfg.with_overrides(alpha=float(alpha)), world, out_dir=out / f"alpha_{i:02d}")
    print(f"{alpha:10.2e} {res.rank_ratio:8.3f} {res.error_ratio:10.3f} {res.bits:10.1f}")

# With a diagonal prior of variance p and weight w a cell is sent only while
# 2w/alpha - 1/p > tau, so the largest alpha that still sends anything is
# 2 max(w) / (1/p + tau).
w_max = (prior_belief(cfg, world, diagonal=True).mean + cfg.weight_offset).max()
print(f"\npredicted emptiness threshold alpha* = {2 * w_max / (1 / cfg.prior_var + cfg.tau):.4g}")
