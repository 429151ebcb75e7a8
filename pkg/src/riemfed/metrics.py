"""Evaluation metrics and the eigen-subspace oracle used as ground truth."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import TOL
from .manifolds import ShapeError


class EigengapWarning(UserWarning):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class GroundTruth:
    X_star: np.ndarray
    eigenvalues: np.ndarray
    f_star: float
    residual: float = 0.0
    iterations: int = 0


def top_r_eigenvectors(
    A: np.ndarray,
    r: int,
    tol: float = TOL.eig_tol,
    max_iters: int = TOL.eig_max_iters,
    seed: int = 0,
    warn: bool = True,
) -> GroundTruth:
    """Top-r eigenpairs of a symmetric matrix by orthogonal iteration.

    Iterates an oversampled block with QR re-orthonormalization and a
    Rayleigh-Ritz rotation each sweep, stopping once
    ``||A Q - Q diag(lam)||_F <= tol * ||A||_F`` on the leading r columns.
    The returned ``f_star`` is ``-sum(lam) / 2``, the optimum of
    ``-1/2 tr(X^T A X)`` over St(d, r).
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d):
        raise ShapeError(f"A must be square, got {A.shape}")
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    a_norm = float(np.linalg.norm(A))
    A = 0.5 * (A + A.T)

    # shift to make the operator PSD so that dominance equals algebraic order
    gersh = float(np.min(np.diag(A) - (np.abs(A).sum(axis=1) - np.abs(np.diag(A)))))
    shift = -gersh if gersh < 0 else 0.0
    B = A + shift * np.eye(d) if shift else A

    b = min(d, 2 * r + 5)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, b)))
    lam = np.zeros(b)
    residual = np.inf
    for it in range(1, max_iters + 1):
        q, _ = np.linalg.qr(B @ q)
        aq = A @ q
        w, v = np.linalg.eigh(q.T @ aq)
        order = np.argsort(w)[::-1]
        lam, v = w[order], v[:, order]
        q = q @ v
        aq = aq @ v
        residual = float(np.linalg.norm(aq[:, :r] - q[:, :r] * lam[:r]))
        if residual <= tol * a_norm:
            break
    else:
        raise ConvergenceError(
            f"orthogonal iteration did not converge in {max_iters} iterations "
            f"(residual {residual:.3e})",
            residual,
        )

    if warn and r < d:
        # the (r+1)-th Ritz value is only an estimate when b < d, good enough for a warning
        gap = lam[r - 1] - lam[r] if r < b else np.inf
        if gap <= TOL.eigengap_rel * abs(lam[0]):
            warnings.warn(
                f"eigengap lambda_r - lambda_(r+1) = {gap:.3e} is tiny; subspace is not unique",
                EigengapWarning,
                stacklevel=2,
            )
    x = q[:, :r].copy()
    return GroundTruth(
        X_star=x,
        eigenvalues=lam[:r].copy(),
        f_star=-0.5 * float(lam[:r].sum()),
        residual=residual,
        iterations=it,
    )


def jacobi_singular_values(M: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Singular values of a (tall or square) matrix by one-sided Jacobi rotations, descending."""
    g = np.array(M, dtype=float, copy=True)
    if g.ndim == 1:
        g = g[:, None]
    m = g.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                alpha = g[:, p] @ g[:, p]
                beta = g[:, q] @ g[:, q]
                gamma = g[:, p] @ g[:, q]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                gp = g[:, p].copy()
                g[:, p] = c * gp - s * g[:, q]
                g[:, q] = s * gp + c * g[:, q]
        if not rotated:
            break
    return np.sort(np.linalg.norm(g, axis=0))[::-1]


def principal_angles(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between span(X) and span(Y).

    Both inputs must have orthonormal columns. Small angles are taken from the
    sines, large ones from the cosines, so neither end loses precision.
    """
    X = np.asarray(X, dtype=float).reshape(np.shape(X)[0], -1)
    Y = np.asarray(Y, dtype=float).reshape(np.shape(Y)[0], -1)
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch {X.shape} vs {Y.shape}")
    cross = X.T @ Y
    cos = np.clip(jacobi_singular_values(cross), 0.0, 1.0)
    sin = np.clip(np.sort(jacobi_singular_values(Y - X @ cross)), 0.0, 1.0)
    return np.where(cos * cos >= 0.5, np.arcsin(sin), np.arccos(cos))


def principal_angle_sum(X: np.ndarray, X_star: np.ndarray) -> float:
    return float(principal_angles(X, X_star).sum())


def global_grad_norm(objective, x: np.ndarray) -> float:
    return float(np.linalg.norm(objective.rgrad(x)))


def ground_truth(objective, **kwargs) -> GroundTruth:
    """Eigen-oracle for a :class:`~riemfed.objectives.GlobalObjective`, shaped like its points."""
    shape = objective.manifold.shape
    r = shape[1] if len(shape) == 2 else 1
    gt = top_r_eigenvectors(objective.mean_covariance, r, **kwargs)
    return GroundTruth(
        X_star=gt.X_star.reshape(shape),
        eigenvalues=gt.eigenvalues,
        f_star=gt.f_star,
        residual=gt.residual,
        iterations=gt.iterations,
    )
