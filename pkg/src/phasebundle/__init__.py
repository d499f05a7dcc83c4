"""Geometric quantisation of families of linear bosonic and fermionic phase spaces."""

from . import errors
from .errors import (
    AdiabaticityError,
    AmbiguityError,
    CompatibilityError,
    DegenerateInputError,
    DomainError,
    GapClosure,
    NumericalFailure,
    PhaseBundleError,
    RefinePathError,
    StructuralError,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "PhaseBundleError",
    "StructuralError",
    "CompatibilityError",
    "DomainError",
    "AmbiguityError",
    "DegenerateInputError",
    "NumericalFailure",
    "RefinePathError",
    "GapClosure",
    "AdiabaticityError",
]
