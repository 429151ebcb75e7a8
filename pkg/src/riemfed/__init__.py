"""Federated optimization on the sphere and Stiefel manifold.

RFedSVRG (variance-reduced local steps with tangent-space consensus) and the
RFedAvg / RFedProx baselines, applied to federated PCA and kPCA.
"""

from .consensus import ConsensusConfig, karcher_mean, tangent_space_mean
from .fedopt import AlgorithmConfig, RoundRecord, initial_point, run, run_rfedavg, run_rfedprox, run_rfedsvrg
from .manifolds import Sphere, Stiefel
from .metrics import ground_truth, principal_angle_sum, top_r_eigenvectors
from .objectives import GlobalObjective, QuadraticObjective

__all__ = [
    "AlgorithmConfig",
    "ConsensusConfig",
    "GlobalObjective",
    "QuadraticObjective",
    "RoundRecord",
    "Sphere",
    "Stiefel",
    "ground_truth",
    "initial_point",
    "karcher_mean",
    "principal_angle_sum",
    "run",
    "run_rfedavg",
    "run_rfedprox",
    "run_rfedsvrg",
    "tangent_space_mean",
    "top_r_eigenvectors",
]

__version__ = "0.1.0"
