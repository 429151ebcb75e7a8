"""Server-side aggregation of client points on a manifold."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import TOL
from .manifolds import Manifold

TANGENT = "tangent"
KARCHER = "karcher"


@dataclass(frozen=True)
class ConsensusConfig:
    method: str = TANGENT
    beta: float = 1.0
    karcher_tol: float = TOL.karcher_tol
    karcher_max_iters: int = 200
    karcher_step: float = 1.0

    def __post_init__(self):
        if self.method not in (TANGENT, KARCHER):
            raise ValueError(f"unknown consensus method {self.method!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.karcher_tol <= 0 or self.karcher_step <= 0 or self.karcher_max_iters < 1:
            raise ValueError("karcher_tol, karcher_step and karcher_max_iters must be positive")


@dataclass
class KarcherResult:
    point: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float
    objective_trace: list[float] = field(default_factory=list)


def mean_log(manifold: Manifold, anchor: np.ndarray, points: Sequence[np.ndarray]) -> np.ndarray:
    """(1/k) sum_i log(anchor, x_i), summed in list order."""
    if len(points) == 0:
        raise ValueError("no points to aggregate")
    acc = manifold.zero_vector(anchor)
    for p in points:
        acc = acc + manifold.log(anchor, p)
    return acc / len(points)


def tangent_space_mean(
    manifold: Manifold, anchor: np.ndarray, points: Sequence[np.ndarray], beta: float = 1.0
) -> np.ndarray:
    """exp(anchor, beta * mean_i log(anchor, x_i)); beta < 1 gives the moving-average variant."""
    return manifold.exp(anchor, beta * mean_log(manifold, anchor, points))


def mean_sq_dist(manifold: Manifold, x: np.ndarray, points: Sequence[np.ndarray]) -> float:
    """h(x) = (1/k) sum_i d^2(x, x_i)."""
    return float(np.mean([manifold.dist(x, p) ** 2 for p in points]))


def karcher_mean(
    manifold: Manifold,
    points: Sequence[np.ndarray],
    init: np.ndarray,
    cfg: ConsensusConfig = ConsensusConfig(method=KARCHER),
    track: bool = False,
) -> KarcherResult:
    """Riemannian gradient descent on h(x) = (1/k) sum d^2(x, x_i).

    grad h(x) = -2 mean_i log(x, x_i). Each step moves
    ``karcher_step * mean_i log(x, x_i)``, i.e. a gradient step of length
    ``karcher_step / 2``, so step 1 sends the two-point problem to the geodesic
    midpoint. Stops when ``||grad h|| <= karcher_tol``.
    """
    if len(points) == 0:
        raise ValueError("no points to aggregate")
    x = init.copy()
    trace = []
    for it in range(1, cfg.karcher_max_iters + 1):
        m = mean_log(manifold, x, points)
        gnorm = 2.0 * manifold.norm(x, m)
        if track:
            trace.append(mean_sq_dist(manifold, x, points))
        if gnorm <= cfg.karcher_tol:
            return KarcherResult(x, it, True, gnorm, trace)
        x = manifold.exp(x, cfg.karcher_step * m)
    gnorm = 2.0 * manifold.norm(x, mean_log(manifold, x, points))
    if track:
        trace.append(mean_sq_dist(manifold, x, points))
    return KarcherResult(x, cfg.karcher_max_iters, gnorm <= cfg.karcher_tol, gnorm, trace)


def aggregate(
    manifold: Manifold, anchor: np.ndarray, points: Sequence[np.ndarray], cfg: ConsensusConfig
) -> np.ndarray:
    if cfg.method == TANGENT:
        return tangent_space_mean(manifold, anchor, points, cfg.beta)
    return karcher_mean(manifold, points, anchor, cfg).point
