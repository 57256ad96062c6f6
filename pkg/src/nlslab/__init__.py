"""Pseudo-spectral NLS simulation and scattering-theory verification."""

__version__ = "0.1.0"

from .dynamics import PhysicsParams, SolverParams, evolve, free_propagate, strang_step
from .errors import (
    ConfigurationError,
    CrossCheckError,
    DomainError,
    ExtractionError,
    FormatError,
    GuardViolation,
    NLSLabError,
)
from .functionals import Observables, observables
from .grid import Field, Grid, make_grid
from .oracles import GaussianSpec, gaussian_free_evolution, gaussian_initial
from .scattering import ScatteringEstimate, extract_scattering_state, pullback

__all__ = [
    "ConfigurationError", "CrossCheckError", "DomainError", "ExtractionError", "Field", "FormatError",
    "GaussianSpec", "Grid", "GuardViolation", "NLSLabError", "Observables", "PhysicsParams",
    "ScatteringEstimate", "SolverParams", "evolve", "extract_scattering_state", "free_propagate",
    "gaussian_free_evolution", "gaussian_initial", "make_grid", "observables", "pullback", "strang_step",
]
