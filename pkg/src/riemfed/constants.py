"""Numerical tolerances shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    sphere_norm: float = 1e-10
    stiefel_orth: float = 1e-8
    sphere_tangent: float = 1e-10
    stiefel_tangent: float = 1e-8
    # eigenvalue pair sums of X^T Y below this make the inverse retraction singular
    sylvester_singular: float = 1e-10
    # below this chord length the sphere log uses the first-order branch
    small_angle: float = 1e-12
    # angle within this of pi counts as antipodal
    antipodal: float = 1e-8
    karcher_tol: float = 1e-6
    eig_tol: float = 1e-10
    eig_max_iters: int = 5000
    eigengap_rel: float = 1e-8


TOL = Tolerances()
