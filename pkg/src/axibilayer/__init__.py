"""Axisymmetric two-phase membrane gradient-flow solver.

Evolves a pair of generating curves under the bending-energy gradient flow
of a two-phase membrane with optional phase-area and volume conservation,
and ships the verification instruments used to validate the scheme.
"""

from .errors import (
    AssumptionViolated,
    AxibilayerError,
    DegenerateMesh,
    NewtonDiverged,
    NonFiniteInput,
    RootNotBracketed,
    SingularJacobian,
    SingularMatrix,
)
from .functionals import PhysicalParams
from .mesh import CurvatureState, PhaseCurve, TwoPhaseMesh

__all__ = [
    "AssumptionViolated",
    "AxibilayerError",
    "CurvatureState",
    "DegenerateMesh",
    "NewtonDiverged",
    "NonFiniteInput",
    "PhaseCurve",
    "PhysicalParams",
    "RootNotBracketed",
    "SingularJacobian",
    "SingularMatrix",
    "TwoPhaseMesh",
]

__version__ = "0.1.0"
