"""Spectral-Galerkin solver for the sixth-order Cahn-Hilliard equation with
hyperbolic (inertial) relaxation, plus the verification tooling around it."""

from ch6relax.exceptions import ConfigError, NumericalOverflowError, StepSizeError
from ch6relax.potential import PotentialSpec, classical
from ch6relax.spectral import Domain

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Domain",
    "NumericalOverflowError",
    "PotentialSpec",
    "StepSizeError",
    "classical",
    "__version__",
]
