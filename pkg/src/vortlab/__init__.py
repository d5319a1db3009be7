"""vortlab: a numerical laboratory for stationary statistics of the 2D
stochastic Navier-Stokes equations on the torus and their inviscid limits."""

from .spectral import Lattice, SpectralField, VelocityField, biot_savart, nonlinear_term
from .forcing import NoiseSpec, default_noise
from .integrator import SolverConfig, State, integrate, step

__version__ = "0.1.0"

__all__ = [
    "Lattice",
    "SpectralField",
    "VelocityField",
    "biot_savart",
    "nonlinear_term",
    "NoiseSpec",
    "default_noise",
    "SolverConfig",
    "State",
    "integrate",
    "step",
    "__version__",
]
