"""Exception types raised by bandgap_qed."""


class BandgapQEDError(Exception):
    """Base class for all package errors."""


class DomainError(BandgapQEDError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError):
    """Evaluation too close to an undamped resonance."""


class SingularityError(BandgapQEDError, ArithmeticError):
    """A conversion denominator vanished."""


class CalibrationError(BandgapQEDError):
    pass


class ExtractionError(BandgapQEDError):
    pass


class NoBoundStateError(BandgapQEDError):
    pass


class FitError(BandgapQEDError):
    pass


class TruncationError(BandgapQEDError):
    """Plane-wave expansion did not converge at the requested order."""


class SteadyStateError(BandgapQEDError):
    """Steady state is undefined, non-unique, or could not be found."""
