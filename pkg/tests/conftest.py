import numpy as np
import pytest

from ratemap.gridmap import GridMap
from ratemap.sim import SimConfig


def corridor_world(rows=16, cols=40, row=8):
    """Walls everywhere except one free row."""
    g = np.ones((rows, cols))
    g[row, :] = 0.0
    return GridMap.from_array(g)


def corridor_config(**kw):
    base = dict(start=(8, 2), goal=(8, 37), supporter_waypoints=[(8, 8), (8, 36)],
                alpha=0.0005, tau=1.4, prior_var=1.0, max_steps=21, session_seed=5, noise_seed=1)
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture
def small_world():
    rng = np.random.default_rng(12)
    g = rng.random((12, 12)) * 0.4
    g[6, 0:9] = 0.9
    return GridMap.from_array(np.round(g * 255) / 255)


@pytest.fixture
def small_config():
    return SimConfig(start=(11, 1), goal=(0, 10), supporter_waypoints=[(8, 10), (8, 1), (3, 1), (3, 10)],
                     alpha=0.05, max_steps=60, session_seed=3, noise_seed=4)
