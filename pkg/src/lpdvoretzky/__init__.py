"""Lewis position, B_q(mu) norms and Gaussian concentration for subspaces of L_p."""
__version__ = "0.1.0"

from .kernels import BACKEND
from .measures import (
    DiscreteIsotropicMeasure,
    NormBody,
    coordinate_measure,
    isotropy_residual,
    norm,
    norm_p_gradient,
    random_isotropic_measure,
)
from .lewis import LewisPosition, SubspaceSpec, lewis_position
from .gaussian import gaussian_moment, sigma_p
from .concentration import psi, tail_profile
from .embedding import build_net, distortion_certificate, frontier_sweep

__all__ = [
    "BACKEND",
    "DiscreteIsotropicMeasure",
    "LewisPosition",
    "NormBody",
    "SubspaceSpec",
    "build_net",
    "coordinate_measure",
    "distortion_certificate",
    "frontier_sweep",
    "gaussian_moment",
    "isotropy_residual",
    "lewis_position",
    "norm",
    "norm_p_gradient",
    "psi",
    "random_isotropic_measure",
    "sigma_p",
    "tail_profile",
    "__version__",
]
