"""Optimal investment under proportional transaction costs, solved as a
one-dimensional free-boundary problem in polar coordinates by adaptive
Chebyshev collocation, with a central-difference baseline."""

from .adaptive_mesh import MeshPolicy, build_policy, interval
from .chebyshev import (MappedGrid, ReferenceGrid, build_reference,
                        derivative_at, interpolate, map_to_interval)
from .exceptions import (ConfigurationError, ExtrapolationError,
                         FrontierDetectionError, SolverFailure)
from .frontier import SolutionPath, TimeSlice
from .model import (BUY, SELL, ModelParams, PolarDomain, coefficients,
                    critical_quantities, domain_angles, extend,
                    gradient_ratio, terminal_value, to_cartesian)
from .solver import FD, SPECTRAL, solve

__all__ = [
    "BUY", "SELL", "FD", "SPECTRAL",
    "ModelParams", "PolarDomain", "MeshPolicy", "MappedGrid",
    "ReferenceGrid", "SolutionPath", "TimeSlice",
    "ConfigurationError", "ExtrapolationError", "FrontierDetectionError",
    "SolverFailure",
    "build_policy", "build_reference", "coefficients",
    "critical_quantities", "derivative_at", "domain_angles", "extend",
    "gradient_ratio", "interpolate", "interval", "map_to_interval",
    "solve", "terminal_value", "to_cartesian",
]

__version__ = "0.1.0"
