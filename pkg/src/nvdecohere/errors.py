"""Exception hierarchy shared by every module of the package."""


class NVDecoherenceError(Exception):
    """Base class for all package errors."""


class AmbiguousZeroState(NVDecoherenceError):
    """No eigenvector has a majority m_s = 0 component."""


class StepTooCoarse(NVDecoherenceError):
    """Time step too large compared with the bath correlation time."""


class ModelPreconditionViolated(NVDecoherenceError):
    """A limiting-case shift model was asked for outside its field geometry."""


class DivisionByNegligible(NVDecoherenceError):
    pass


class OutOfRange(NVDecoherenceError):
    pass


class GridMismatch(NVDecoherenceError):
    """Pulse times or trajectory length incompatible with the time grid."""


class NoDecayDetected(NVDecoherenceError):
    pass


class NonConvergence(NVDecoherenceError):
    pass


class InsufficientData(NVDecoherenceError):
    pass


class NonPositiveValue(NVDecoherenceError):
    pass


class EmptySeries(NVDecoherenceError):
    pass


class ParseError(NVDecoherenceError):
    """Malformed configuration document."""


class ValidationError(NVDecoherenceError):
    """Well-formed configuration with an invalid or unknown field."""
