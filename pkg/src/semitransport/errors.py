"""Exception hierarchy shared by all modules."""


class TransportError(Exception):
    """Base class for every error raised by this package."""


class TimeNotInScale(TransportError, ValueError):
    pass


class HorizonBoundary(TransportError, ValueError):
    """Graininess (or jump) was requested at the last point of a finite scale."""


class RegressivityViolation(TransportError, ValueError):
    pass


class CFLViolation(RegressivityViolation):
    """The positivity condition ``1 - k*mu_t/mu_x > 0`` fails at some step."""


class QuadratureFailure(TransportError, RuntimeError):
    pass


class HorizonEmpty(TransportError, ValueError):
    pass


class IndexOutOfWindow(TransportError, IndexError):
    pass


class TimeNotOnGrid(TransportError, ValueError):
    pass


class NegativeDataError(TransportError, ValueError):
    """Distributions were requested from a field with negative initial data."""


class TooLarge(TransportError, ValueError):
    pass


class BranchUnavailable(TransportError, ValueError):
    pass


class HorizonTooShort(TransportError, ValueError):
    pass


class ConfigError(TransportError, ValueError):
    pass
