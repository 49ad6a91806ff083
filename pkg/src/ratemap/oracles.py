"""Brute-force reference implementations used to cross-check the fast code.

Each oracle reaches its answer by a different route from the production
function it checks: grid search instead of closed form, Dijkstra on a sparse
graph instead of A*, information form instead of gain form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import channel
from .beliefs import Belief, update_own
from .planner import astar, path_cost
from .rdcomp import oracle_scalar_rd, reverse_water_filling


def rd_objective_grid(w_tilde, p_plus, alpha: float, points: int = 200_000) -> float:
    """Optimal ``tr(W~ P) + alpha * I`` from per-eigenvalue grid searches.

    The eigenvalues of ``W~ P+`` (a general, non-symmetric eigenproblem) are
    the per-component variances; each component is minimised separately.
    """
    s2 = np.sort(np.real(linalg.eigvals(np.asarray(w_tilde) @ np.asarray(p_plus))))
    total = 0.0
    for s in s2:
        if s <= 0:
            continue
        q = oracle_scalar_rd(float(s), alpha, points)
        total += q + 0.5 * alpha * (np.log(s) - np.log(q))
    return float(total)


def rd_objective_closed_form(w_tilde, p_plus, alpha: float) -> float:
    """Objective value at the closed-form optimum, evaluated on the returned matrix."""
    sol = reverse_water_filling(w_tilde, p_plus, alpha)
    _, ld_plus = np.linalg.slogdet(p_plus)
    _, ld_next = np.linalg.slogdet(sol.p_bb_next)
    return float(np.trace(np.asarray(w_tilde) @ sol.p_bb_next) + 0.5 * alpha * (ld_plus - ld_next))


def dijkstra_cost(costs: np.ndarray, start, goal, eight_connected: bool = False) -> float:
    """Least summed vertex cost from ``start`` to ``goal`` (both included)."""
    rows, cols = costs.shape
    steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if eight_connected:
        steps += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    src, dst, wts = [], [], []
    for r in range(rows):
        for c in range(cols):
            for dr, dc in steps:
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols:
                    src.append(r * cols + c)
                    dst.append(nr * cols + nc)
                    wts.append(costs[nr, nc])
    graph = csr_matrix((wts, (src, dst)), shape=(rows * cols, rows * cols))
    dist = dijkstra(graph, indices=start[0] * cols + start[1])
    return float(dist[goal[0] * cols + goal[1]] + costs[start[0], start[1]])


def information_form_posterior(cov, h, r):
    """``(P^-1 + H^T R^-1 H)^-1`` for a linear measurement ``y = H x + v``."""
    info = linalg.inv(cov) + h.T @ linalg.solve(r, h)
    return linalg.inv(info)


def batch_least_squares(prior_mean, prior_cov, hs, ys, rs):
    """Stacked generalised least squares over the prior and all measurements."""
    h = np.vstack([np.eye(prior_mean.size)] + list(hs))
    y = np.concatenate([prior_mean] + list(ys))
    r = linalg.block_diag(prior_cov, *rs)
    rinv_h = linalg.solve(r, h)
    cov = linalg.inv(h.T @ rinv_h)
    return cov @ (rinv_h.T @ y), cov


@dataclass(frozen=True)
class EcdqStats:
    mean: float
    var: float
    corr: float


def ecdq_statistics(samples: int, delta: float, rng: np.random.Generator, seed: int = 1) -> EcdqStats:
    """Reconstruction-error statistics of the dithered quantizer on random signals."""
    o = rng.normal(0.0, 3.0 * delta, samples)
    deltas = np.full(samples, delta)
    eta = channel.dither_sequence(channel.DitherSpec(seed, 0, deltas))
    k = channel.quantize(o, deltas, eta)
    err = channel.reconstruct(k, deltas, eta) - o
    return EcdqStats(float(err.mean()), float(err.var()), float(np.corrcoef(err, o)[0, 1]))


def coder_roundtrip(messages: int, rng: np.random.Generator) -> int:
    """Number of random messages that fail to survive code, frame, parse and decode."""
    failures = 0
    for step in range(messages):
        n = int(rng.integers(0, 12))
        ks = rng.integers(-(2**20), 2**20, n) // rng.integers(1, 2**20, n).clip(1)
        msg = channel.WireMessage(step, (int(rng.integers(0, 2**16)), 0), channel.entropy_code(ks))
        back = channel.parse(channel.frame(msg))
        if back != msg or channel.entropy_decode(back.payload_bits, n) != [int(k) for k in ks]:
            failures += 1
    return failures


def random_pd(rng: np.random.Generator, d: int, floor: float = 0.1) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return a @ a.T / d + floor * np.eye(d)


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Quick versions of every oracle cross-check; returns ``(name, ok, detail)``."""
    rng = np.random.default_rng(seed)
    out = []

    worst = 0.0
    for _ in range(25):
        d = int(rng.integers(1, 9))
        w, p = random_pd(rng, d, 0.5), random_pd(rng, d)
        alpha = float(10 ** rng.uniform(-3, 1))
        ref = rd_objective_grid(w, p, alpha)
        worst = max(worst, abs(rd_objective_closed_form(w, p, alpha) - ref) / max(abs(ref), 1e-12))
    out.append(("rdcomp water-filling vs grid search", worst <= 1e-5, f"max rel err {worst:.2e}"))

    mismatches = 0
    for _ in range(100):
        rows, cols = (int(v) for v in rng.integers(1, 9, 2))
        costs = rng.random((rows, cols)) + 0.025
        costs[rng.random((rows, cols)) < 0.2] = rows * cols * 0.526
        start = (int(rng.integers(rows)), int(rng.integers(cols)))
        goal = (int(rng.integers(rows)), int(rng.integers(cols)))
        got = path_cost(astar(costs, start, goal, 0.025), costs)
        mismatches += not np.isclose(got, dijkstra_cost(costs, start, goal), rtol=0, atol=1e-12)
    out.append(("planner A* vs Dijkstra", mismatches == 0, f"{mismatches} mismatches in 100"))

    st = ecdq_statistics(100_000, 0.37, rng)
    ok = abs(st.mean) <= 0.01 * 0.37 and abs(st.var / (0.37**2 / 12) - 1) <= 0.05 and abs(st.corr) < 0.02
    out.append(("channel dithered-quantizer statistics", ok,
                f"mean {st.mean:.2e} var ratio {st.var / (0.37**2 / 12):.4f} corr {st.corr:.2e}"))

    fails = coder_roundtrip(1000, rng)
    out.append(("channel coder round trip", fails == 0, f"{fails} failures in 1000"))

    d = 5
    cov = random_pd(rng, d)
    sel = np.array([0, 2, 3])
    b = update_own(Belief(np.zeros(d), cov), sel, np.zeros(3), 0.01)
    h = np.eye(d)[sel]
    err = float(np.abs(b.cov - information_form_posterior(cov, h, 0.01 * np.eye(3))).max())
    out.append(("beliefs gain form vs information form", err <= 1e-8, f"max abs err {err:.2e}"))
    return out
