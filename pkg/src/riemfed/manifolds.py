"""Sphere and Stiefel manifolds.

Points and tangent vectors are plain numpy arrays. A point on ``Sphere(d)`` is
a unit vector of shape ``(d,)``; a point on ``Stiefel(d, r)`` is a ``(d, r)``
matrix with orthonormal columns. Tangent vectors have the shape of their base
point. The sphere uses exact geodesic formulas. The Stiefel manifold uses the
polar retraction and its inverse in place of exp/log, and projection-based
vector transport in place of parallel transport.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constants import TOL


class GeometryError(ValueError):
    """Base class for manifold operation failures."""


class InvalidInputError(GeometryError):
    pass


class ShapeError(GeometryError):
    pass


class DegenerateGeometryError(GeometryError):
    """Raised for antipodal sphere points, where the log map has no unique value."""


class InjectivityError(GeometryError):
    """Raised when a Stiefel point lies outside the inverse retraction's domain."""


def sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


class Manifold(abc.ABC):
    """Common interface for the manifolds used by the federated solvers."""

    @property
    @abc.abstractmethod
    def shape(self) -> tuple[int, ...]: ...

    @abc.abstractmethod
    def exp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def log(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def transport(self, x: np.ndarray, y: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def proj(self, x: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def random_point(self, rng: np.random.Generator) -> np.ndarray: ...

    @abc.abstractmethod
    def constraint_violation(self, x: np.ndarray) -> float: ...

    @abc.abstractmethod
    def tangent_violation(self, x: np.ndarray, v: np.ndarray) -> float: ...

    def inner(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(u * v))

    def norm(self, x: np.ndarray, v: np.ndarray) -> float:
        return float(np.linalg.norm(v))

    def dist(self, x: np.ndarray, y: np.ndarray) -> float:
        return self.norm(x, self.log(x, y))

    def zero_vector(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.shape)

    def random_tangent(self, x: np.ndarray, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
        v = self.proj(x, rng.standard_normal(self.shape))
        nv = np.linalg.norm(v)
        return v * (norm / nv) if nv > 0 else v

    def check(self, *arrays: np.ndarray) -> None:
        for a in arrays:
            shape = getattr(a, "shape", None)
            if shape != self.shape:
                raise ShapeError(f"expected shape {self.shape}, got {np.shape(a)}")
            # a NaN or inf anywhere makes the sum non-finite
            if not math.isfinite(np.add.reduce(a, axis=None)):
                raise InvalidInputError("non-finite entries")

    def contains(self, x: np.ndarray) -> bool:
        return np.shape(x) == self.shape and self.constraint_violation(x) <= self.point_tol

    point_tol: float = 0.0


@dataclass(frozen=True)
class Sphere(Manifold):
    """Unit sphere S^{d-1} in R^d."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")

    point_tol = TOL.sphere_norm

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return (self.d,)

    def constraint_violation(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def tangent_violation(self, x, v):
        return abs(float(x @ v))

    def proj(self, x, v):
        self.check(x, v)
        return v - (x @ v) * x

    def exp(self, x, v):
        self.check(x, v)
        t = math.sqrt(v @ v)
        if t == 0.0:
            return x.copy()
        y = math.cos(t) * x + (math.sin(t) / t) * v
        return y / math.sqrt(y @ y)

    def log(self, x, y):
        self.check(x, y)
        c = float(x @ y)
        w = y - c * x
        s = math.sqrt(w @ w)
        # atan2 keeps full precision for small and near-pi angles alike
        theta = math.atan2(s, min(max(c, -1.0), 1.0))
        if math.pi - theta <= TOL.antipodal:
            raise DegenerateGeometryError("log map undefined for antipodal points")
        if s <= TOL.small_angle:
            # first-order: theta/sin(theta) -> 1
            return w
        return (theta / s) * w

    def transport(self, x, y, v):
        self.check(x, y, v)
        c = float(x @ y)
        if 1.0 + c <= 0.5 * TOL.antipodal**2:
            raise DegenerateGeometryError("transport undefined between antipodal points")
        # same map as v - <log_x y, v>/theta^2 (log_x y + log_y x), but without
        # the 0/0 at y == x
        return v - (float(y @ v) / (1.0 + c)) * (x + y)

    def dist(self, x, y):
        self.check(x, y)
        c = float(x @ y)
        w = y - c * x
        return math.atan2(math.sqrt(w @ w), min(max(c, -1.0), 1.0))

    def random_point(self, rng):
        x = rng.standard_normal(self.d)
        return x / np.linalg.norm(x)


@dataclass(frozen=True)
class Stiefel(Manifold):
    """Stiefel manifold St(d, r) of d x r matrices with orthonormal columns."""

    d: int
    r: int

    def __post_init__(self):
        if self.d < 1 or self.r < 1 or self.r > self.d:
            raise ValueError(f"need 1 <= r <= d, got d={self.d}, r={self.r}")

    point_tol = TOL.stiefel_orth

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return (self.d, self.r)

    def constraint_violation(self, x):
        return float(np.linalg.norm(x.T @ x - np.eye(self.r)))

    def tangent_violation(self, x, v):
        xv = x.T @ v
        return float(np.linalg.norm(xv + xv.T)) / max(1.0, float(np.linalg.norm(v)))

    def proj(self, x, v):
        self.check(x, v)
        return v - x @ sym(x.T @ v)

    def exp(self, x, v):
        """Polar retraction (X + V)(I + V^T V)^{-1/2}."""
        self.check(x, v)
        z = x + v
        # Z^T Z = I + V^T V for tangent V; using Z^T Z keeps the result orthonormal
        # even if V carries a small normal component.
        w, q = np.linalg.eigh(z.T @ z)
        if np.any(w <= 0):
            raise InvalidInputError("X + V is rank deficient")
        return z @ (q / np.sqrt(w)) @ q.T

    def log(self, x, y):
        """Inverse polar retraction.

        Finds the symmetric M with (X^T Y) M + M (Y^T X) = 2 I; then Y M - X is
        the tangent vector V at X whose retraction is Y.
        """
        self.check(x, y)
        b = x.T @ y
        m = _solve_symmetric_sylvester(b)
        # retr(X, Y M - X) = Y polar(M), which equals Y only for positive definite M
        if np.linalg.eigvalsh(m).min() <= 0:
            raise InjectivityError("inverse retraction solution is not positive definite")
        return self.proj(x, y @ m - x)

    def transport(self, x, y, v):
        self.check(x, y, v)
        return v - y @ sym(y.T @ v)

    def random_point(self, rng):
        q, r = np.linalg.qr(rng.standard_normal(self.shape))
        # fix column signs so the map from the Gaussian draw is well defined
        return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def _solve_symmetric_sylvester(b: np.ndarray) -> np.ndarray:
    """Solve B M + M B^T = 2 I for M.

    The operator M -> B M + M B^T has eigenvalues lambda_i + lambda_j over the
    eigenvalues of B; the solution is unique (and symmetric) iff none vanish.
    """
    r = b.shape[0]
    lam = np.linalg.eigvals(b)
    pair = np.abs(lam[:, None] + lam[None, :])
    if pair.min() < TOL.sylvester_singular:
        raise InjectivityError(
            f"inverse retraction singular: min eigenvalue pair sum {pair.min():.3e}"
        )
    eye = np.eye(r)
    # row-major vec: vec(B M) = (B kron I) vec(M), vec(M B^T) = (I kron B) vec(M)
    op = np.kron(b, eye) + np.kron(eye, b)
    m = np.linalg.solve(op, 2.0 * eye.ravel()).reshape(r, r)
    return sym(m)


def manifold_for(d: int, r: int) -> Manifold:
    """Sphere for r == 1, Stiefel otherwise."""
    return Sphere(d) if r == 1 else Stiefel(d, r)
