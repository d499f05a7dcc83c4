"""Exception hierarchy shared by all modules."""


class PhaseBundleError(Exception):
    """Base class for library errors."""


class StructuralError(PhaseBundleError):
    """Inputs of the wrong shape, mismatched dimensions or an open loop."""


class CompatibilityError(PhaseBundleError):
    """A complex structure is not compatible with the fixed form."""


class DomainError(PhaseBundleError):
    """An argument lies outside the domain of an operation."""


class AmbiguityError(DomainError):
    """The requested object is not uniquely defined (e.g. antipodal points)."""


class DegenerateInputError(DomainError):
    """Degenerate geometric input such as collinear polygon vertices."""


class NumericalFailure(PhaseBundleError):
    """A numerical procedure failed to converge or lost rank."""


class RefinePathError(NumericalFailure):
    """A path is too coarse for continuous branch tracking."""


class GapClosure(NumericalFailure):
    """Two energy levels came closer than the gap floor."""

    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class AdiabaticityError(NumericalFailure):
    """The evolved state leaked out of the tracked level."""
