"""Linear minimum-variance belief over the global map.

The belief keeps only a mean and a covariance.  Covariance updates depend on
*where* measurements were taken, never on their values, which is what lets
two agents track the same covariance independently.

A belief's covariance is either a dense ``d x d`` array or, for very large
maps with an uncorrelated prior, a length-``d`` vector holding the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .gridmap import complement_indices, write_pgm


@dataclass(frozen=True)
class Belief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        d = mean.size
        if cov.shape not in ((d, d), (d,)):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {d}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def isotropic(cls, mean, var: float, d: int | None = None, diagonal: bool = False) -> "Belief":
        """Belief with covariance ``var * I``; ``mean`` may be a scalar."""
        mean = np.asarray(mean, dtype=float)
        if mean.ndim == 0:
            if d is None:
                raise ValueError("d is required for a scalar mean")
            mean = np.full(d, float(mean))
        d = mean.size
        cov = np.full(d, float(var)) if diagonal else float(var) * np.eye(d)
        return cls(mean, cov)

    @property
    def d(self) -> int:
        return self.mean.size

    @property
    def is_diagonal(self) -> bool:
        return self.cov.ndim == 1

    def variances(self) -> np.ndarray:
        return self.cov.copy() if self.is_diagonal else np.diag(self.cov).copy()

    def dense_cov(self) -> np.ndarray:
        return np.diag(self.cov) if self.is_diagonal else self.cov


@dataclass(frozen=True)
class BlockCov:
    """Covariance split into the selected block ``B`` and its complement ``O``."""

    p_bb: np.ndarray
    p_ob: np.ndarray
    p_oo: np.ndarray

    def assemble(self) -> np.ndarray:
        """Covariance of the reordered state ``[x_B, x_O]``."""
        return np.block([[self.p_bb, self.p_ob.T], [self.p_ob, self.p_oo]])


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _solve_spd(s: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``s x = b`` for symmetric positive definite ``s``."""
    try:
        return linalg.cho_solve(linalg.cho_factor(s, lower=True, check_finite=False), b,
                                check_finite=False)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError("innovation covariance is not positive definite") from exc


def _gather_update_cov(cov: np.ndarray, idx: np.ndarray, noise: np.ndarray):
    """Gain and posterior covariance for direct measurements of cells ``idx``.

    ``noise`` holds per-measurement variances.  Returns ``(gain, new_cov)``.
    """
    pct = cov[:, idx]
    s = pct[idx, :] + np.diag(noise)
    gain = _solve_spd(s, pct.T).T
    new_cov = symmetrize(cov - gain @ pct.T)
    return gain, new_cov


def own_cov_update(cov: np.ndarray, sel, sigma_m_sq: float):
    """Covariance part of the Seeker's own-observation update.

    Returns ``(gain, new_cov)``; ``gain`` is None for diagonal storage.
    """
    sel = np.asarray(sel, dtype=np.intp)
    if sigma_m_sq <= 0:
        raise ValueError("measurement variance must be positive")
    if cov.ndim == 1:
        p = cov[sel]
        new_cov = cov.copy()
        new_cov[sel] = p * sigma_m_sq / (p + sigma_m_sq)
        return p / (p + sigma_m_sq), new_cov
    return _gather_update_cov(cov, sel, np.full(sel.size, float(sigma_m_sq)))


def update_own(b: Belief, sel, y_a, sigma_m_sq: float) -> Belief:
    """Fuse a noisy direct observation ``y_a`` of the cells ``sel``."""
    sel = np.asarray(sel, dtype=np.intp)
    y_a = np.asarray(y_a, dtype=float).reshape(-1)
    if sel.size == 0:
        raise ValueError("selection must contain at least one cell")
    if y_a.size != sel.size:
        raise ValueError(f"expected {sel.size} measurements, got {y_a.size}")
    gain, new_cov = own_cov_update(b.cov, sel, sigma_m_sq)
    innovation = y_a - b.mean[sel]
    mean = b.mean.copy()
    if b.is_diagonal:
        mean[sel] += gain * innovation
    else:
        mean += gain @ innovation
    return Belief(mean, new_cov)


def _plan_noise(plan) -> np.ndarray:
    """Covariance of the effective noise carried by a compressed measurement."""
    n = np.diag(np.asarray(plan.deltas, dtype=float) ** 2 / 12.0)
    if getattr(plan, "v", None) is not None:
        theta = plan.theta
        n = n + theta @ plan.v @ theta.T
    return n


def compressed_cov_update(cov: np.ndarray, sel_b, plan):
    """Covariance part of the compressed-observation update.

    Returns ``(gain, new_cov)`` with ``gain`` None when the plan is empty.
    """
    sel_b = np.asarray(sel_b, dtype=np.intp)
    if plan.rank == 0:
        return None, cov
    if plan.d_b != sel_b.size:
        raise ValueError(f"plan expects {plan.d_b} local cells, selection has {sel_b.size}")
    axes = getattr(plan, "axes", None)
    if axes is not None and getattr(plan, "v", None) is None:
        # rows of theta are unit vectors: a plain heteroscedastic cell measurement
        idx = sel_b[axes]
        noise = np.asarray(plan.deltas, dtype=float) ** 2 / 12.0
        if cov.ndim == 1:
            p = cov[idx]
            new_cov = cov.copy()
            new_cov[idx] = p * noise / (p + noise)
            return p / (p + noise), new_cov
        return _gather_update_cov(cov, idx, noise)
    if cov.ndim == 1:
        raise ValueError("dense compression plans need a dense covariance")
    theta = plan.theta
    hp = theta @ cov[sel_b, :]
    s = hp[:, sel_b] @ theta.T + _plan_noise(plan)
    gain = _solve_spd(symmetrize(s), hp).T
    new_cov = symmetrize(cov - gain @ hp)
    return gain, new_cov


def update_compressed(b: Belief, sel_b, plan, y_b) -> Belief:
    """Fuse the reconstructed compressed observation ``y_b = theta x_B + n``."""
    if plan.rank == 0:
        return b
    sel_b = np.asarray(sel_b, dtype=np.intp)
    y_b = np.asarray(y_b, dtype=float).reshape(-1)
    if y_b.size != plan.rank:
        raise ValueError(f"expected {plan.rank} compressed values, got {y_b.size}")
    gain, new_cov = compressed_cov_update(b.cov, sel_b, plan)
    mean = b.mean.copy()
    axes = getattr(plan, "axes", None)
    if axes is not None and getattr(plan, "v", None) is None:
        idx = sel_b[axes]
        innovation = y_b - mean[idx]
        if b.is_diagonal:
            mean[idx] += gain * innovation
        else:
            mean += gain @ innovation
    else:
        mean += gain @ (y_b - plan.theta @ b.mean[sel_b])
    return Belief(mean, new_cov)


def marginal_blocks(b: Belief, sel_b) -> BlockCov:
    sel_b = np.asarray(sel_b, dtype=np.intp)
    rest = complement_indices(sel_b, b.d)
    p = b.dense_cov()
    return BlockCov(p[np.ix_(sel_b, sel_b)], p[np.ix_(rest, sel_b)], p[np.ix_(rest, rest)])


def project_estimate(b: Belief) -> np.ndarray:
    """Mean clamped to the admissible range ``[0, 1]``."""
    return np.clip(b.mean, 0.0, 1.0)


def save_belief(b: Belief, shape: tuple[int, int], prefix) -> None:
    """Write ``<prefix>.pgm`` (clamped mean), ``<prefix>_mean.csv`` and ``<prefix>_var.csv``."""
    prefix = Path(prefix)
    grid = b.mean.reshape(shape)
    write_pgm(prefix.with_suffix(".pgm"), np.clip(grid, 0.0, 1.0))
    np.savetxt(f"{prefix}_mean.csv", grid, delimiter=",", fmt="%.17g")
    np.savetxt(f"{prefix}_var.csv", b.variances().reshape(shape), delimiter=",", fmt="%.17g")
