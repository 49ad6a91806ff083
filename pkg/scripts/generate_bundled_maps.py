"""Regenerate the synthetic maps shipped in ``src/ratemap/data``.

The maps are seeded, so rerunning this script reproduces the bundled files
byte for byte.

    python scripts/generate_bundled_maps.py
"""

from pathlib import Path

import numpy as np
from scipy import ndimage

from ratemap.gridmap import write_pgm

DATA = Path(__file__).resolve().parents[1] / "src" / "ratemap" / "data"


def rough_ground(rng, shape, smooth=2.0, lo=0.0, hi=0.45):
    noise = ndimage.gaussian_filter(rng.random(shape), smooth, mode="reflect")
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    return lo + (hi - lo) * noise


def earth32(seed=8):
    """32x32 map whose three walls force a long zig-zag route."""
    rng = np.random.default_rng(seed)
    g = rough_ground(rng, (32, 32), hi=0.3)
    wall = np.zeros((32, 32), dtype=bool)
    wall[24, 3:32] = True          # gap on the left, away from the goal
    wall[16, 0:29] = True          # gap on the right
    wall[8, 3:32] = True           # gap on the left
    g[wall] = 0.75 + 0.25 * rng.random(wall.sum())
    return np.round(g * 255) / 255


def earth64(seed=11):
    """64x64 map with scattered obstacles and three offset walls."""
    rng = np.random.default_rng(seed)
    g = rough_ground(rng, (64, 64), smooth=3.0)
    blobs = ndimage.gaussian_filter(rng.random((64, 64)), 2.5) > 0.56
    g[blobs] = 0.8
    g[44:46, 0:50] = 0.9
    g[28:30, 14:64] = 0.9
    g[12:14, 0:44] = 0.9
    return np.round(g * 255) / 255


def mars_elevation(seed=3, n=128):
    """Synthetic elevation: rolling plain, a few craters and ridges (metres)."""
    rng = np.random.default_rng(seed)
    z = 4.0 * ndimage.gaussian_filter(rng.standard_normal((n, n)), 12.0, mode="reflect")
    rr, cc = np.mgrid[0:n, 0:n]
    for _ in range(9):
        r0, c0 = rng.uniform(0, n, 2)
        radius = rng.uniform(4, 14)
        depth = rng.uniform(1.0, 3.0)
        dist = np.hypot(rr - r0, cc - c0) / radius
        z += depth * (np.exp(-4 * (dist - 1) ** 2) * 0.6 - np.exp(-3 * dist**2))
    z += 0.15 * ndimage.gaussian_filter(rng.standard_normal((n, n)), 1.0)
    return z


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    write_pgm(DATA / "earth32.pgm", earth32())
    write_pgm(DATA / "earth64.pgm", earth64())
    np.savetxt(DATA / "mars128_elevation.csv", mars_elevation(), delimiter=",", fmt="%.6f")


if __name__ == "__main__":
    main()
