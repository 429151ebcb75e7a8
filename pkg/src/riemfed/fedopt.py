"""Federated solvers on manifolds: RFedSVRG, RFedAvg and RFedProx.

Clients are simulated in-process. Each round samples ``k`` of ``n`` clients,
runs ``tau`` local steps on each from the current server point, and
aggregates the returned points with the configured consensus rule.
Randomness comes from independent streams keyed by (seed, purpose, round,
client), so results do not depend on how many workers run the clients.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .consensus import ConsensusConfig, aggregate
from .manifolds import Manifold
from .metrics import principal_angle_sum
from .objectives import GlobalObjective, QuadraticObjective

RFEDSVRG = "rfedsvrg"
RFEDAVG = "rfedavg"
RFEDPROX = "rfedprox"
ALGORITHMS = (RFEDSVRG, RFEDAVG, RFEDPROX)

LAST = "last"
SAMPLE = "sample"

WORKERS_ENV = "RIEMFED_WORKERS"

# stream tags for SeedSequence keys
_SAMPLING, _CLIENT_OPTION, _SERVER_OPTION = 0, 1, 2


@dataclass(frozen=True)
class AlgorithmConfig:
    algorithm: str
    n: int
    k: int
    T: int
    tau: int
    eta: float
    server_option: str = LAST
    client_option: str = LAST
    mu: float = 0.0
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name in ("server_option", "client_option"):
            if getattr(self, name) not in (LAST, SAMPLE):
                raise ValueError(f"{name} must be {LAST!r} or {SAMPLE!r}")
        if self.client_option == SAMPLE and self.algorithm != RFEDSVRG:
            raise ValueError("client_option 'sample' is only defined for rfedsvrg")


@dataclass(frozen=True)
class RoundRecord:
    """Metrics at server iterate x_t.

    ``sampled_clients`` and ``elapsed_seconds`` describe the round that starts
    from x_t; the record for the final point has no sampled clients.
    """

    round: int
    grad_norm: float
    loss: float
    principal_angle_sum: Optional[float]
    sampled_clients: tuple[int, ...]
    elapsed_seconds: float


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def sample_clients(n: int, k: int, rng: np.random.Generator) -> list[int]:
    """Uniform k-subset of range(n), returned in increasing order."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k == n:
        return list(range(n))
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))


def svrg_local_step(
    manifold: Manifold,
    x_prev: np.ndarray,
    anchor: np.ndarray,
    client: QuadraticObjective,
    global_grad_at_anchor: np.ndarray,
    eta: float,
    client_grad_at_anchor: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One variance-reduced local step.

    x+ = exp(x, -eta * (grad f_i(x) - P_{anchor->x}(grad f_i(anchor) - grad f(anchor))))
    """
    if client_grad_at_anchor is None:
        client_grad_at_anchor = client.rgrad(manifold, anchor)
    correction = manifold.transport(anchor, x_prev, client_grad_at_anchor - global_grad_at_anchor)
    direction = client.rgrad(manifold, x_prev) - correction
    return manifold.exp(x_prev, -eta * direction)


def gradient_local_step(manifold: Manifold, x_prev: np.ndarray, client: QuadraticObjective, eta: float) -> np.ndarray:
    return manifold.exp(x_prev, -eta * client.rgrad(manifold, x_prev))


def prox_grad(
    manifold: Manifold, x: np.ndarray, anchor: np.ndarray, client: QuadraticObjective, mu: float
) -> np.ndarray:
    """Riemannian gradient of h(x) = f_i(x) + mu/2 d^2(x, anchor)."""
    g = client.rgrad(manifold, x)
    if mu == 0.0:
        return g
    return g - mu * manifold.log(x, anchor)


def prox_value(manifold: Manifold, x: np.ndarray, anchor: np.ndarray, client: QuadraticObjective, mu: float) -> float:
    return client.value(x) + 0.5 * mu * manifold.dist(x, anchor) ** 2


def prox_local_step(
    manifold: Manifold, x_prev: np.ndarray, anchor: np.ndarray, client: QuadraticObjective, eta: float, mu: float
) -> np.ndarray:
    return manifold.exp(x_prev, -eta * prox_grad(manifold, x_prev, anchor, client, mu))


def _client_update(
    cfg: AlgorithmConfig,
    objective: GlobalObjective,
    i: int,
    t: int,
    anchor: np.ndarray,
    global_grad: np.ndarray,
) -> np.ndarray:
    manifold = objective.manifold
    client = objective.clients[i]
    x = anchor
    iterates = []
    if cfg.algorithm == RFEDSVRG:
        g_i = client.rgrad(manifold, anchor)
        for _ in range(cfg.tau):
            x = svrg_local_step(manifold, x, anchor, client, global_grad, cfg.eta, g_i)
            iterates.append(x)
        if cfg.client_option == SAMPLE:
            ell = int(stream(cfg.seed, _CLIENT_OPTION, t, i).integers(cfg.tau))
            return iterates[ell]
        return x
    if cfg.algorithm == RFEDAVG:
        for _ in range(cfg.tau):
            x = gradient_local_step(manifold, x, client, cfg.eta)
        return x
    for _ in range(cfg.tau):
        x = prox_local_step(manifold, x, anchor, client, cfg.eta, cfg.mu)
    return x


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _record(objective, x, t, x_star, sampled, elapsed, grad=None) -> RoundRecord:
    g = objective.rgrad(x) if grad is None else grad
    angle = principal_angle_sum(x, x_star) if x_star is not None else None
    return RoundRecord(
        round=t,
        grad_norm=float(np.linalg.norm(g)),
        loss=objective.value(x),
        principal_angle_sum=angle,
        sampled_clients=tuple(sampled),
        elapsed_seconds=elapsed,
    )


def run(
    cfg: AlgorithmConfig,
    objective: GlobalObjective,
    x0: np.ndarray,
    x_star: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
    on_round: Optional[Callable[[RoundRecord, np.ndarray], None]] = None,
) -> tuple[np.ndarray, list[RoundRecord]]:
    """Run ``cfg.algorithm`` for ``cfg.T`` rounds from ``x0``.

    Returns the output point (last iterate or, with ``server_option='sample'``,
    a uniformly drawn x_1..x_T) and one record per server iterate x_0..x_T.
    ``T == 0`` returns ``x0`` and an empty history. ``on_round(record, x_t)``
    is called for every record as it is produced.
    """
    if cfg.n != objective.n:
        raise ValueError(f"config has n={cfg.n} but objective has {objective.n} clients")
    manifold = objective.manifold
    manifold.check(x0)
    if not manifold.contains(x0):
        raise ValueError("x0 is not on the manifold")
    if cfg.T == 0:
        return x0.copy(), []

    workers = default_workers() if workers is None else max(1, workers)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    x = x0.copy()
    iterates = [x]
    history: list[RoundRecord] = []
    try:
        for t in range(cfg.T):
            start = time.perf_counter()
            sampled = sample_clients(cfg.n, cfg.k, stream(cfg.seed, _SAMPLING, t))
            # full gradient over all n clients, shipped to the sampled ones
            g = objective.rgrad(x)

            def work(i, x=x, g=g, t=t):
                return _client_update(cfg, objective, i, t, x, g)

            points = list(pool.map(work, sampled)) if pool else [work(i) for i in sampled]
            x_next = aggregate(manifold, x, points, cfg.consensus)
            rec = _record(objective, x, t, x_star, sampled, time.perf_counter() - start, grad=g)
            history.append(rec)
            if on_round:
                on_round(rec, x)
            x = x_next
            iterates.append(x)
    finally:
        if pool:
            pool.shutdown()
    final_rec = _record(objective, x, cfg.T, x_star, (), 0.0)
    history.append(final_rec)
    if on_round:
        on_round(final_rec, x)

    if cfg.server_option == SAMPLE:
        t_out = 1 + int(stream(cfg.seed, _SERVER_OPTION).integers(cfg.T))
        return iterates[t_out].copy(), history
    return x, history


def run_rfedsvrg(cfg, objective, x0, **kwargs):
    return run(_with_algorithm(cfg, RFEDSVRG), objective, x0, **kwargs)


def run_rfedavg(cfg, objective, x0, **kwargs):
    return run(_with_algorithm(cfg, RFEDAVG), objective, x0, **kwargs)


def run_rfedprox(cfg, objective, x0, **kwargs):
    return run(_with_algorithm(cfg, RFEDPROX), objective, x0, **kwargs)


def _with_algorithm(cfg: AlgorithmConfig, name: str) -> AlgorithmConfig:
    if cfg.algorithm == name:
        return cfg
    return replace(cfg, algorithm=name, client_option=LAST if name != RFEDSVRG else cfg.client_option)


def initial_point(manifold: Manifold, seed: int) -> np.ndarray:
    """Seeded random start: Gaussian draw, normalized (sphere) or QR-orthonormalized (Stiefel)."""
    return manifold.random_point(np.random.default_rng(np.random.SeedSequence([seed, 7])))


def client_objectives(covariances: Sequence[np.ndarray]) -> list[QuadraticObjective]:
    return [QuadraticObjective(a) for a in covariances]
