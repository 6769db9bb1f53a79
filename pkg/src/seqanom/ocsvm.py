"""One-class SVM: Gaussian-kernel dual QP solved by pairwise SMO.

Training minimizes ``f(a) = a' K a`` over the capped simplex
``0 <= a_i <= 1/(nu*l), sum a = 1``. Each SMO step picks the maximal
violating pair under the gradient ``G = K a`` (the index free to grow with
the smallest G and the index free to shrink with the largest), moves mass
between them by the exact line-search step clipped to the box, and updates
G incrementally. The offset ``rho`` is the mean of ``sum_j a_j K(x_j, x_i)``
over margin points strictly inside the box; the decision score is
``SV(y) = sum_i a_i K(x_i, y) - rho``.

The kernel is ``K(x, y) = exp(-|x - y|^2 / gamma)``; larger gamma means a
wider kernel. Solutions are exact up to the KKT gap tolerance, with no
external solver dependency; dense kernel caching keeps this practical up to
a few thousand training vectors, which is why callers subsample above
``SUBSAMPLE_CAP``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Callers should uniformly subsample training sets above this size; the
# dense solve is cubic-ish and the kernel cache quadratic.
SUBSAMPLE_CAP = 4000

# Alpha values at or below this are treated as zero (support-vector pruning
# and margin detection). The box is at most 1, so an absolute tolerance works.
ALPHA_TOL = 1e-9

KKT_TOL = 1e-3
MAX_PAIR_UPDATES = 1_000_000


class SolverError(RuntimeError):
    """SMO failed to reach the KKT tolerance within the update budget."""


@dataclass(frozen=True)
class KernelParams:
    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def kernel_eval(x: np.ndarray, y: np.ndarray, k: KernelParams) -> float:
    """exp(-|x - y|^2 / gamma) for a single pair of vectors."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(np.exp(-np.dot(d, d) / k.gamma))


def kernel_matrix(xs: np.ndarray, ys: np.ndarray, k: KernelParams) -> np.ndarray:
    """Pairwise kernel values, shape (len(xs), len(ys))."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    sq = (
        (xs * xs).sum(axis=1)[:, None]
        + (ys * ys).sum(axis=1)[None, :]
        - 2.0 * (xs @ ys.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / k.gamma)


@dataclass
class OcsvmModel:
    """Trained model: support vectors, their weights, and the offset.

    ``train_size`` is the number of vectors the QP was solved over (after
    any caller-side subsampling); the box bound is ``1 / (nu * train_size)``.
    ``dual_objective`` and ``kkt_gap`` record solver quality diagnostics.
    """

    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    kernel: KernelParams
    nu: float
    train_size: int
    dual_objective: float = float("nan")
    kkt_gap: float = float("nan")

    @property
    def box_bound(self) -> float:
        return 1.0 / (self.nu * self.train_size)

    def decision(self, y: np.ndarray) -> float:
        """Support-vector expansion SV(y); negative means outlier."""
        d = self.support_vectors - np.asarray(y, dtype=np.float64)
        kv = np.exp(-(d * d).sum(axis=1) / self.kernel.gamma)
        return float(self.alphas @ kv) - self.rho


def decision(model: OcsvmModel, y: np.ndarray) -> float:
    return model.decision(y)


def offset(model: OcsvmModel) -> float:
    """Recompute rho from the stored support set.

    Averages ``sum_j a_j K(x_j, x_i)`` over margin support vectors (alphas
    strictly inside the box); if none exist, falls back to the maximum over
    all support vectors.
    """
    kmat = kernel_matrix(model.support_vectors, model.support_vectors, model.kernel)
    g = kmat @ model.alphas
    margin = (model.alphas > ALPHA_TOL) & (model.alphas < model.box_bound - ALPHA_TOL)
    if margin.any():
        return float(g[margin].mean())
    return float(g.max())


def train(
    points: np.ndarray,
    nu: float,
    k: KernelParams,
    tol: float = KKT_TOL,
    max_pair_updates: int = MAX_PAIR_UPDATES,
) -> OcsvmModel:
    """Solve the one-class dual QP over ``points`` (l x e)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError(f"need an l x e matrix of training vectors, got {points.shape}")
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    l = points.shape[0]
    if nu * l < 1.0:
        raise ValueError(
            f"infeasible constraints: nu*l = {nu * l:.4g} < 1 "
            f"(box bound below 1/l); grow the training set or nu"
        )
    c_box = 1.0 / (nu * l)

    kmat = kernel_matrix(points, points, k)
    alpha = np.full(l, 1.0 / l)
    grad = kmat @ alpha

    gap = float("inf")
    converged = False
    for _ in range(max_pair_updates):
        can_up = alpha < c_box - ALPHA_TOL
        can_down = alpha > ALPHA_TOL
        if not can_up.any():
            converged = True
            break
        i = int(np.argmin(np.where(can_up, grad, np.inf)))
        j = int(np.argmax(np.where(can_down, grad, -np.inf)))
        gap = float(grad[j] - grad[i])
        if gap <= tol:
            converged = True
            break
        eta = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
        step_max = min(c_box - alpha[i], alpha[j])
        delta = gap / eta if eta > 1e-15 else step_max
        if delta >= step_max:
            delta = step_max
        alpha[i] += delta
        alpha[j] -= delta
        grad += delta * (kmat[:, i] - kmat[:, j])
    if not converged:
        raise SolverError(
            f"no convergence after {max_pair_updates} pair updates "
            f"(l={l}, nu={nu}, KKT gap={gap:.3g}, tol={tol})"
        )

    grad = kmat @ alpha  # clean recompute for diagnostics
    keep = alpha > ALPHA_TOL
    model = OcsvmModel(
        support_vectors=points[keep].copy(),
        alphas=alpha[keep].copy(),
        rho=0.0,
        kernel=k,
        nu=nu,
        train_size=l,
        dual_objective=float(alpha @ grad),
        kkt_gap=gap if np.isfinite(gap) else 0.0,
    )
    model.rho = offset(model)
    return model
