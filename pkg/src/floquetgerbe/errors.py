"""Exception types shared across the package."""


class FloquetGerbeError(Exception):
    """Base class for all package errors."""


class UnitarityError(FloquetGerbeError):
    """A matrix that must be unitary is not, beyond tolerance."""


class DegenerateSpectrumError(FloquetGerbeError):
    """Eigenphase gap below tolerance where a simple spectrum is required."""


class CrossingError(FloquetGerbeError):
    """Quasienergy crossing detected along a parameter path.

    Carries the parameter value nearest the crossing in ``location``.
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ContinuationError(FloquetGerbeError):
    """Branch continuation became ambiguous (two candidates too close)."""


class BranchMismatchError(FloquetGerbeError):
    """Two sections do not differ by a single winding mode on an overlap."""


class GridError(FloquetGerbeError):
    """A sampling grid is too coarse or inconsistent for the operation."""


class ScheduleError(FloquetGerbeError):
    """A drive schedule is undefined, non-finite, or out of range."""


class ConfigError(FloquetGerbeError):
    """Run configuration failed validation.

    ``field`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class VerificationError(FloquetGerbeError):
    """A verification suite found an invariant violation."""
