"""Exception hierarchy shared by all qpnls modules."""


class QPError(Exception):
    """Base class for every error raised by qpnls."""


class RankError(QPError):
    pass


class CollisionError(QPError):
    """Two distinct parent modes project onto (numerically) the same frequency."""


class DimensionMismatch(QPError, ValueError):
    pass


class LatticeMismatch(QPError, ValueError):
    pass


class ShapeMismatch(QPError, ValueError):
    pass


class NotRealError(QPError, ValueError):
    """Potential mode list is not conjugate-symmetric."""


class NonFinite(QPError, FloatingPointError):
    """A state acquired inf/nan entries during time stepping."""


class NonIntegralSteps(QPError, ValueError):
    pass


class DomainError(QPError, ValueError):
    pass


class ParseError(QPError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ValidationError(QPError):
    pass
