"""PCA / kPCA objectives f_i(X) = -1/2 tr(X^T A_i X) and their global average."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .manifolds import Manifold, ShapeError
from .metrics import top_r_eigenvectors


@dataclass(frozen=True)
class QuadraticObjective:
    """Negative half Rayleigh quotient of a symmetric PSD matrix ``A``.

    ``weight`` scales both value and gradient; the 1/n averaging of the global
    objective is applied separately by :class:`GlobalObjective`.
    """

    A: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"A must be square, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("A has non-finite entries")
        scale = max(np.linalg.norm(a), 1.0)
        if np.linalg.norm(a - a.T) > 1e-10 * scale:
            raise ValueError("A must be symmetric")
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        object.__setattr__(self, "A", a)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def _check(self, x):
        if x.shape[0] != self.dim:
            raise ShapeError(f"point has leading dimension {x.shape[0]}, objective has {self.dim}")

    def value(self, x: np.ndarray) -> float:
        self._check(x)
        # sum(X * A X) == tr(X^T A X), and also works for 1-D sphere points
        return -0.5 * self.weight * float(np.sum(x * (self.A @ x)))

    def egrad(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return -self.weight * (self.A @ x)

    def rgrad(self, manifold: Manifold, x: np.ndarray) -> np.ndarray:
        return manifold.proj(x, self.egrad(x))

    def lipschitz(self) -> float:
        """Largest eigenvalue of ``weight * A``; bounds the Euclidean gradient's Lipschitz constant."""
        return self.weight * top_r_eigenvectors(self.A, 1, warn=False).eigenvalues[0]


@dataclass(frozen=True)
class GlobalObjective:
    """f = (1/n) sum_i f_i over an ordered list of client objectives on one manifold."""

    clients: Sequence[QuadraticObjective]
    manifold: Manifold
    _mean_cov: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clients = tuple(self.clients)
        if not clients:
            raise ValueError("need at least one client")
        d = self.manifold.shape[0]
        for i, c in enumerate(clients):
            if c.dim != d:
                raise ShapeError(f"client {i} has dimension {c.dim}, manifold has {d}")
        object.__setattr__(self, "clients", clients)
        acc = np.zeros((d, d))
        for c in clients:
            acc += c.weight * c.A
        object.__setattr__(self, "_mean_cov", acc / len(clients))

    @property
    def n(self) -> int:
        return len(self.clients)

    @property
    def mean_covariance(self) -> np.ndarray:
        """Weighted mean of the client matrices; f(X) = -1/2 tr(X^T Abar X)."""
        return self._mean_cov

    # f and its gradient are linear in the client matrices, so both go through
    # the precomputed mean instead of n separate products
    def value(self, x: np.ndarray) -> float:
        self.manifold.check(x)
        return -0.5 * float(np.sum(x * (self._mean_cov @ x)))

    def egrad(self, x: np.ndarray) -> np.ndarray:
        return -(self._mean_cov @ x)

    def rgrad(self, x: np.ndarray) -> np.ndarray:
        """Mean of the client Riemannian gradients (projection is linear, so project once)."""
        return self.manifold.proj(x, self.egrad(x))

    def client_rgrad(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.clients[i].rgrad(self.manifold, x)


def smoothness_constant(objective: GlobalObjective, reduce: str = "sum") -> float:
    """Smoothness estimate from the clients' largest eigenvalues.

    ``reduce="sum"`` returns sum_i L_i with L_i = lambda_max(A_i). ``"mean"``
    returns lambda_max of the mean matrix, the tight constant for the average
    objective f.
    """
    if reduce == "sum":
        return float(sum(c.lipschitz() for c in objective.clients))
    if reduce == "mean":
        return float(top_r_eigenvectors(objective.mean_covariance, 1, warn=False).eigenvalues[0])
    raise ValueError(f"unknown reduce {reduce!r}")
