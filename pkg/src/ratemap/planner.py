"""Shortest paths over the projected belief with a feasibility-gated cell cost."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .gridmap import Cell

_STEPS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_STEPS_8 = _STEPS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class PlanConfig:
    """Movement penalty ``a`` and feasibility threshold ``epsilon``.

    ``eight_connected`` is off by default; paths then move between edge
    neighbours only.
    """

    a: float = 0.025
    epsilon: float = 0.501
    eight_connected: bool = False

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("movement penalty must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


def cell_cost(x_tilde, cfg: PlanConfig, d: int):
    """Cost of entering a cell: ``x + a`` when feasible, ``d (eps + a)`` otherwise.

    Works elementwise on arrays.
    """
    x_tilde = np.asarray(x_tilde, dtype=float)
    cost = np.where(x_tilde <= cfg.epsilon, x_tilde + cfg.a, d * (cfg.epsilon + cfg.a))
    return float(cost) if cost.ndim == 0 else cost


def path_cost(path: Sequence[Sequence[int]], costs: np.ndarray) -> float:
    """Sum of vertex costs over ``path`` (start and goal included)."""
    return float(sum(costs[r, c] for r, c in path))


def plan(x_tilde, shape: tuple[int, int], start: Sequence[int], goal: Sequence[int],
         cfg: PlanConfig) -> list[Cell]:
    """A* over the grid minimising the summed cost of visited cells.

    The heuristic is ``a`` times the Manhattan (Chebyshev with 8-connectivity)
    distance, which never exceeds the remaining cost since every cell costs
    at least ``a``.  Ties are broken on ``(f, h, row, col)``.
    """
    rows, cols = shape
    costs = cell_cost(np.asarray(x_tilde, dtype=float).reshape(rows, cols), cfg, rows * cols)
    return astar(costs, start, goal, cfg.a, cfg.eight_connected)


def astar(costs: np.ndarray, start: Sequence[int], goal: Sequence[int], a: float,
          eight_connected: bool = False) -> list[Cell]:
    rows, cols = costs.shape
    start, goal = Cell(*start), Cell(*goal)
    for cell in (start, goal):
        if not (0 <= cell.row < rows and 0 <= cell.col < cols):
            raise IndexError(f"cell {tuple(cell)} outside {rows}x{cols} grid")
    steps = _STEPS_8 if eight_connected else _STEPS_4
    gr, gc = goal

    def h(r, c):
        dr, dc = abs(r - gr), abs(c - gc)
        return a * (max(dr, dc) if eight_connected else dr + dc)

    g = np.full((rows, cols), np.inf)
    parent = -np.ones((rows, cols), dtype=np.int64)
    closed = np.zeros((rows, cols), dtype=bool)
    g[start] = costs[start]
    h0 = h(*start)
    heap = [(g[start] + h0, h0, start.row, start.col)]
    while heap:
        _, _, r, c = heapq.heappop(heap)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if (r, c) == goal:
            break
        for dr, dc in steps:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or closed[nr, nc]:
                continue
            cand = g[r, c] + costs[nr, nc]
            if cand < g[nr, nc]:
                g[nr, nc] = cand
                parent[nr, nc] = r * cols + c
                hn = h(nr, nc)
                heapq.heappush(heap, (cand + hn, hn, nr, nc))
    path = [goal]
    idx = parent[goal]
    while idx >= 0:
        path.append(Cell(*divmod(int(idx), cols)))
        idx = parent[path[-1]]
    path.reverse()
    return path


def save_path(path, cells: Sequence[Sequence[int]]) -> None:
    with Path(path).open("w") as fh:
        fh.write("row,col\n")
        for r, c in cells:
            fh.write(f"{r},{c}\n")
