"""Exception hierarchy shared by all modules."""


class ParsError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ParsError, ValueError):
    """Invalid distribution or sampler parameter."""


class DomainError(ParsError, ValueError):
    """A point lies outside (or on the boundary of) a target's domain."""


class IntegrabilityError(ParsError, ValueError):
    """The envelope would have infinite mass.

    Usually means the initial support points do not bracket the mode.
    """


class DegenerateSlopeError(ParsError, ArithmeticError):
    """Two tangents are (numerically) parallel."""


class NodeCapError(ParsError, RuntimeError):
    """A sampler run hit its configured ``max_nodes`` limit."""


class QuadratureError(ParsError, RuntimeError):
    """Numerical integration failed to converge."""


class ParseError(ParsError, ValueError):
    """Syntax error in a log-density expression."""

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(DomainError):
    """An expression could not be evaluated at a point (log of a negative, ...)."""

    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)
