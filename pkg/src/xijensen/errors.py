"""Exception hierarchy shared by every module of the package."""


class XiJensenError(Exception):
    """Base class for all package errors."""


class InsufficientPrecision(XiJensenError):
    """An enclosure was too wide to decide something at the current precision.

    Raised inside a computation to ask the caller (usually
    :func:`xijensen.precision.refine_until`) to retry at a higher precision.
    """


class PrecisionExhausted(XiJensenError):
    """The escalation ceiling ``max_bits`` was reached without success."""


class DomainError(XiJensenError):
    """An integrand or function returned an invalid (non-finite) enclosure."""


class ConvergenceFailure(XiJensenError):
    pass


class SignUncertified(PrecisionExhausted):
    """A quantity known to be positive could not be certified positive."""


class RadicandUncertified(InsufficientPrecision):
    pass


class MissingCoefficient(XiJensenError, KeyError):
    pass


class DegenerateChain(PrecisionExhausted):
    """A Sturm remainder's leading coefficient stayed uncertified at max precision."""


class IllConditioned(XiJensenError):
    pass


class TruncationUnsound(XiJensenError):
    pass


class FloorUncertified(XiJensenError):
    pass
