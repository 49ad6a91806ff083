"""Rate-distortion design of the Supporter's compressed message.

Given the Seeker's covariance after its own update, the Supporter's field of
view and the path-proximity weights, :func:`design_compression` returns the
linear compression ``theta`` and per-component quantizer steps that minimise

    tr(W P_next) + alpha * I(o; y)

where the bit-rate term is the Gaussian mutual information of the dithered
channel.  The problem collapses onto the Supporter's block (Schur complement
of the outside cells folded into an effective weight), after which the
optimum is reverse water-filling on the eigenvalues of
``W~^(1/2) P_BB W~^(1/2)`` at the level ``alpha / 2``.

All logarithms are natural; bit counts are obtained by dividing by ``ln 2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .beliefs import BlockCov, symmetrize

log = logging.getLogger(__name__)

EPS_RANK = 1e-9
SYM_TOL = 1e-9
MAX_CONDITION = 1e15


class NoisyConditionViolated(Exception):
    """The noise-free optimum is not reachable through the noisy observation.

    Raised when the information matrix of the noise-free design is not
    strictly dominated by the inverse observation-noise covariance.
    """

    def __init__(self, max_eig: float):
        super().__init__(f"max eigenvalue of V^1/2 M V^1/2 is {max_eig:.6g} (needs < 1)")
        self.max_eig = max_eig


@dataclass(frozen=True)
class RdSolution:
    """Water-filling optimum on the Supporter block.

    ``sigmas`` are the eigenvalues of ``W~^(1/2) P+ W~^(1/2)``, ``phi`` the
    clipped levels and ``sigma_diag`` the per-component information.  On the
    diagonal fast path ``p_bb_next`` and ``m`` are stored as their diagonals.
    """

    p_bb_next: np.ndarray
    m: np.ndarray
    sigmas: np.ndarray
    phi: np.ndarray
    sigma_diag: np.ndarray
    bitrate_nats: float

    @property
    def rank(self) -> int:
        """Number of water-filled components (before any pruning)."""
        return int(np.count_nonzero(self.sigma_diag > 0))

    @property
    def bitrate_bits(self) -> float:
        return self.bitrate_nats / np.log(2.0)


@dataclass(frozen=True)
class CompressionPlan:
    """Compression matrix and quantizer steps for one message.

    ``theta`` has one row per transmitted component.  When every row is a
    unit vector the plan is stored through ``axes`` (the local cell picked by
    each row) and ``theta`` is built on demand.  ``v`` is the Supporter's
    observation-noise covariance when that noise is modelled.
    """

    deltas: np.ndarray
    d_b: int
    basis: np.ndarray | None = None
    axes: np.ndarray | None = None
    v: np.ndarray | None = None
    lambdas: np.ndarray = field(default=None, repr=False)

    @classmethod
    def empty(cls, d_b: int) -> "CompressionPlan":
        return cls(np.zeros(0), d_b, basis=np.zeros((0, d_b)), lambdas=np.zeros(0))

    @property
    def rank(self) -> int:
        return int(np.asarray(self.deltas).size)

    @property
    def theta(self) -> np.ndarray:
        if self.basis is not None:
            return self.basis
        theta = np.zeros((self.rank, self.d_b))
        theta[np.arange(self.rank), self.axes] = 1.0
        return theta

    @property
    def noise_var(self) -> np.ndarray:
        return np.asarray(self.deltas, dtype=float) ** 2 / 12.0

    def information(self) -> np.ndarray:
        """``theta^T N^-1 theta``, the information the message carries about ``x_B``."""
        theta = self.theta
        return theta.T @ (theta / self.noise_var[:, None])

    def same_as(self, other: "CompressionPlan") -> bool:
        """Bit-for-bit equality of the transmitted design."""
        return (
            self.d_b == other.d_b
            and np.array_equal(self.deltas, other.deltas)
            and np.array_equal(self.theta, other.theta)
        )


@dataclass(frozen=True)
class DesignResult:
    plan: CompressionPlan
    solution: RdSolution
    noisy_fallback: bool = False


# ---------------------------------------------------------------------------
# building blocks


def _check_symmetric(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return symmetrize(a)


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so the first non-negligible component of each is positive."""
    vecs = np.array(vecs, dtype=float)
    if vecs.size == 0:
        return vecs
    mag = np.abs(vecs)
    tol = 1e-12 * mag.max(axis=0, keepdims=True)
    first = np.argmax(mag > tol, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def sym_sqrt(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(a^(1/2), a^(-1/2))`` of a symmetric positive definite matrix."""
    vals, vecs = linalg.eigh(a, check_finite=False)
    if vals.min(initial=np.inf) <= 0:
        raise ValueError("matrix is not positive definite")
    root = np.sqrt(vals)
    return (vecs * root) @ vecs.T, (vecs / root) @ vecs.T


def _factor_pbb(p_bb: np.ndarray):
    """Cholesky factor of ``P_BB``, regularised once if needed."""
    try:
        return linalg.cho_factor(p_bb, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    vals = linalg.eigvalsh(p_bb, check_finite=False)
    reg = p_bb + 1e-12 * np.eye(p_bb.shape[0])
    cond = (vals.max() + 1e-12) / max(vals.min() + 1e-12, np.finfo(float).tiny)
    if vals.min() + 1e-12 <= 0 or cond > MAX_CONDITION:
        raise linalg.LinAlgError(f"P_BB is too ill-conditioned to invert (condition ~{cond:.3g})")
    return linalg.cho_factor(reg, lower=True, check_finite=False)


def regression_matrix(p_bb: np.ndarray, p_ob: np.ndarray) -> np.ndarray:
    """``Q = P_OB P_BB^-1``."""
    if p_ob.shape[0] == 0:
        return np.zeros((0, p_bb.shape[0]))
    return linalg.cho_solve(_factor_pbb(p_bb), p_ob.T, check_finite=False).T


def schur_terms(blocks: BlockCov) -> tuple[np.ndarray, np.ndarray]:
    """Regression of outside cells on the block and the unexplained residual.

    Returns ``q = P_OB P_BB^-1`` and ``s = P_OO - q P_BB q^T``.
    """
    q = regression_matrix(blocks.p_bb, blocks.p_ob)
    s = symmetrize(blocks.p_oo - q @ blocks.p_bb @ q.T)
    return q, s


def effective_weight(w_bb, w_oo, q) -> np.ndarray:
    """``W~ = W_BB + Q^T W_OO Q`` for diagonal weights given as vectors."""
    w_bb = np.asarray(w_bb, dtype=float)
    w_oo = np.asarray(w_oo, dtype=float)
    q = np.asarray(q, dtype=float).reshape(w_oo.size, w_bb.size)
    return symmetrize(np.diag(w_bb) + q.T @ (w_oo[:, None] * q))


def reverse_water_filling(w_tilde, p_bb_plus, alpha: float) -> RdSolution:
    """Closed-form optimum of ``tr(W~ P) - (alpha/2) ln det P`` s.t. ``P <= P+``.

    Eigenvalues ``s_i`` of ``W~^(1/2) P+ W~^(1/2)`` are clipped at ``alpha/2``.
    Components with ``s_i > alpha/2`` are transmitted with information
    ``2/alpha - 1/s_i``; the others are left alone.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    w_tilde = _check_symmetric(w_tilde, "effective weight")
    p_plus = _check_symmetric(p_bb_plus, "P_BB+")
    w_half, w_mhalf = sym_sqrt(w_tilde)
    vals, vecs = linalg.eigh(symmetrize(w_half @ p_plus @ w_half), check_finite=False)
    vecs = fix_signs(vecs)
    vals = np.maximum(vals, 0.0)  # singular P+ gives round-off negatives
    level = alpha / 2.0
    phi = np.minimum(level, vals)
    active = vals > level
    sigma_diag = np.zeros_like(vals)
    sigma_diag[active] = 2.0 / alpha - 1.0 / vals[active]
    left = w_mhalf @ vecs
    p_next = symmetrize((left * phi) @ left.T)
    right = w_half @ vecs
    m = symmetrize((right * sigma_diag) @ right.T)
    rate = 0.5 * float(np.sum(np.log(vals[active]) - np.log(level)))
    return RdSolution(p_next, m, vals, phi, sigma_diag, rate)


def _water_fill_diagonal(w: np.ndarray, p: np.ndarray, alpha: float) -> RdSolution:
    """Per-entry water-filling when ``W~`` and ``P+`` are both diagonal."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    vals = w * p
    level = alpha / 2.0
    phi = np.minimum(level, vals)
    active = vals > level
    sigma_diag = np.zeros_like(vals)
    sigma_diag[active] = 2.0 / alpha - 1.0 / vals[active]
    rate = 0.5 * float(np.sum(np.log(vals[active]) - np.log(level)))
    return RdSolution(phi / w, w * sigma_diag, vals, phi, sigma_diag, rate)


def rsd(a, eps_rank: float = EPS_RANK) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-factors of a PSD matrix restricted to eigenvalues above ``eps_rank``.

    Returns ``(theta, lambdas)`` with the retained eigenvectors as rows of
    ``theta`` and ``lambdas`` sorted in descending order, so that
    ``theta.T @ diag(lambdas) @ theta`` reconstructs ``a``.
    """
    a = _check_symmetric(a, "RSD input")
    if a.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros(0)
    vals, vecs = linalg.eigh(a, check_finite=False)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > eps_rank
    theta = fix_signs(vecs[:, keep]).T
    return theta, vals[keep]


def mrsd(a, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """:func:`rsd` keeping only eigenvalues above ``tau`` (drops low-SNR components)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return rsd(a, eps_rank=tau)


def _logdet_pd(a: np.ndarray, name: str) -> float:
    try:
        c, _ = linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ValueError(f"{name} is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def bitrate(p_bb_plus, p_bb_next) -> float:
    """Gaussian bit-rate in nats from the covariance reduction of the block."""
    p_plus = _check_symmetric(p_bb_plus, "P_BB+")
    p_next = _check_symmetric(p_bb_next, "P_BB next")
    if p_plus.shape[0] == 0:
        return 0.0
    return max(0.0, 0.5 * (_logdet_pd(p_plus, "P_BB+") - _logdet_pd(p_next, "P_BB next")))


def bitrate_direct(theta, deltas, p_bb) -> float:
    """``1/2 ln det(theta P theta^T + N) - 1/2 ln det N`` in nats."""
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size == 0:
        return 0.0
    theta = np.asarray(theta, dtype=float)
    n = deltas**2 / 12.0
    s = symmetrize(theta @ np.asarray(p_bb, dtype=float) @ theta.T) + np.diag(n)
    return max(0.0, 0.5 * (_logdet_pd(s, "theta P theta^T + N") - float(np.sum(np.log(n)))))


def plan_bitrate(plan: CompressionPlan, p_bb) -> float:
    """Surrogate bit-rate (nats) of a plan against the block covariance."""
    if plan.rank == 0:
        return 0.0
    if plan.axes is not None and np.ndim(p_bb) == 1:
        p = np.asarray(p_bb)[plan.axes]
        return float(0.5 * np.sum(np.log1p(p / plan.noise_var)))
    p_bb = np.diag(p_bb) if np.ndim(p_bb) == 1 else p_bb
    if plan.v is not None:
        theta = plan.theta
        noise = theta @ plan.v @ theta.T + np.diag(plan.noise_var)
        s = symmetrize(theta @ p_bb @ theta.T) + noise
        return max(0.0, 0.5 * (_logdet_pd(s, "innovation") - _logdet_pd(symmetrize(noise), "noise")))
    return bitrate_direct(plan.theta, plan.deltas, p_bb)


def noisy_adjust(m, v) -> tuple[np.ndarray, np.ndarray]:
    """Re-derive the factors of ``M`` for a Supporter observing with noise ``V``.

    Returns ``RSD((V - V M V)^-1 - V^-1)``, the ``(theta, N^-1)`` pair whose
    message ``theta (x_B + mu) + n`` carries exactly the information ``M``.
    Raises :class:`NoisyConditionViolated` unless ``M < V^-1``.
    """
    m = _check_symmetric(m, "M")
    v = _check_symmetric(v, "V")
    v_half, _ = sym_sqrt(v)
    max_eig = float(linalg.eigvalsh(symmetrize(v_half @ m @ v_half), check_finite=False).max(initial=0.0))
    if max_eig >= 1.0 - 1e-9:
        raise NoisyConditionViolated(max_eig)
    inner = symmetrize(v - v @ m @ v)
    target = linalg.inv(inner) - linalg.inv(v)
    return rsd(symmetrize(target))


def oracle_scalar_rd(sigma_sq: float, alpha: float, points: int = 200_000) -> float:
    """Grid-search minimiser of ``q - (alpha/2) ln q`` over ``(0, sigma_sq]``.

    Brute-force reference for the per-component water level, independent of
    the closed form.  The grid is log-spaced over twelve decades below
    ``sigma_sq`` and includes the endpoint.
    """
    if sigma_sq <= 0:
        return 0.0
    grid = sigma_sq * np.logspace(-12.0, 0.0, points)
    obj = grid - 0.5 * alpha * np.log(grid)
    return float(grid[np.argmin(obj)])


# ---------------------------------------------------------------------------
# full design


def _is_diagonal(a: np.ndarray) -> bool:
    if a.ndim == 1:
        return True
    return np.count_nonzero(a) == np.count_nonzero(np.diagonal(a))


def design_compression(p_plus, sel_b, weights, alpha: float, tau: float, v=None) -> DesignResult:
    """Optimal compression of the Supporter's local map.

    Parameters
    ----------
    p_plus : ndarray
        Seeker covariance after its own update, dense ``(d, d)`` or a
        length-``d`` diagonal.
    sel_b : array of int
        Global indices of the Supporter's field of view.
    weights : array
        Per-cell importance, length ``d``.
    alpha : float
        Price of one nat of bit-rate.
    tau : float
        Components of the information matrix with eigenvalue <= ``tau`` are
        dropped.
    v : ndarray, optional
        Covariance of the Supporter's own observation noise on ``x_B``.

    Returns
    -------
    DesignResult
        ``plan`` holds the compression; ``solution`` the unpruned water-filling
        quantities.  ``noisy_fallback`` is set when ``v`` was given but the
        noisy optimum was unreachable and the noise-free factors were used.
    """
    if not alpha > 0 or not tau > 0:
        raise ValueError("alpha and tau must be positive")
    sel_b = np.asarray(sel_b, dtype=np.intp)
    weights = np.asarray(weights, dtype=float)
    p_plus = np.asarray(p_plus, dtype=float)
    d = weights.size
    d_b = sel_b.size
    v_mat = None if v is None else np.asarray(v, dtype=float)
    if v_mat is not None and v_mat.ndim == 0:
        v_mat = float(v_mat) * np.eye(d_b)
    if v_mat is not None and v_mat.shape != (d_b, d_b):
        raise ValueError(f"noise covariance must be {d_b}x{d_b}")

    if _is_diagonal(p_plus):
        # no cross-covariance: Q = 0 and W~ = W_BB, water-fill entrywise
        p_diag = p_plus if p_plus.ndim == 1 else np.diag(p_plus)
        sol = _water_fill_diagonal(weights[sel_b], p_diag[sel_b], alpha)
        if v_mat is None:
            lam = sol.m
            keep = np.flatnonzero(lam > tau)
            keep = keep[np.argsort(-lam[keep], kind="stable")]
            lambdas = lam[keep]
            plan = CompressionPlan(np.sqrt(12.0 / lambdas), d_b, axes=keep, lambdas=lambdas)
            return DesignResult(plan, sol)
        m = np.diag(sol.m)
    else:
        p_bb = symmetrize(p_plus[np.ix_(sel_b, sel_b)])
        rest = np.ones(d, dtype=bool)
        rest[sel_b] = False
        q = regression_matrix(p_bb, p_plus[np.ix_(rest, sel_b)])
        w_tilde = effective_weight(weights[sel_b], weights[rest], q)
        sol = reverse_water_filling(w_tilde, p_bb, alpha)
        m = sol.m

    fallback = False
    if v_mat is not None:
        try:
            theta, lambdas = noisy_adjust(m, v_mat)
            keep = lambdas > tau
            theta, lambdas = theta[keep], lambdas[keep]
        except NoisyConditionViolated as exc:
            log.info("noisy design unreachable (%s); using noise-free factors", exc)
            fallback = True
            theta, lambdas = mrsd(m, tau)
    else:
        theta, lambdas = mrsd(m, tau)
    plan = CompressionPlan(np.sqrt(12.0 / lambdas), d_b, basis=theta, v=v_mat, lambdas=lambdas)
    return DesignResult(plan, sol, fallback)


def dump_solution(path, sol: RdSolution, plan: CompressionPlan, step: int | None = None,
                  append: bool = False) -> None:
    """Write per-component water-filling diagnostics as CSV.

    One row per eigen-component: ``sigma_sq, phi, sigma, delta`` where
    ``delta`` is empty for components that were not transmitted.
    """
    path = Path(path)
    new = not (append and path.exists())
    order = np.argsort(-sol.sigmas, kind="stable")
    deltas = list(np.asarray(plan.deltas))
    with path.open("a" if append else "w") as fh:
        if new:
            fh.write("step,component,sigma_sq,phi,sigma,delta\n")
        for i, k in enumerate(order):
            delta = f"{deltas[i]:.17g}" if i < len(deltas) else ""
            fh.write(
                f"{'' if step is None else step},{i},{sol.sigmas[k]:.17g},"
                f"{sol.phi[k]:.17g},{sol.sigma_diag[k]:.17g},{delta}\n"
            )
