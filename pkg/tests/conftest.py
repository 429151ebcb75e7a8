from pathlib import Path

import numpy as np
import pytest

from riemfed.manifolds import Sphere, Stiefel

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_psd(rng, d, scale=1.0):
    g = rng.standard_normal((d, d))
    return scale * (g @ g.T) / d


def orthonormal(rng, d, r):
    q, _ = np.linalg.qr(rng.standard_normal((d, r)))
    return q


def manifolds_small():
    return [Sphere(3), Sphere(20), Stiefel(5, 2), Stiefel(12, 3)]


@pytest.fixture(params=manifolds_small(), ids=lambda m: repr(m))
def manifold(request):
    return request.param


def directional_fd(fun, manifold, x, xi, h=1e-5):
    """Central difference of t -> fun(exp_x(t xi)) at t = 0."""
    return (fun(manifold.exp(x, h * xi)) - fun(manifold.exp(x, -h * xi))) / (2 * h)


def fd_relative_error(fd, grad, xi):
    # normalised by |g||xi| so directions nearly orthogonal to g don't blow up the ratio
    exact = float(np.sum(grad * xi))
    scale = max(abs(exact), float(np.linalg.norm(grad) * np.linalg.norm(xi)), 1e-300)
    return abs(fd - exact) / scale


# --- acceptance reporting ----------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} | {detail}"
        ACCEPTANCE[number] = line
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
