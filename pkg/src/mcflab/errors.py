"""Exception types raised across mcflab."""


class McfLabError(Exception):
    """Base class for all mcflab errors."""


class DomainViolation(McfLabError, ValueError):
    """Input lies outside the (margin-restricted) domain of a closed-form expression."""


class OriginSingularity(DomainViolation):
    """Evaluation too close to x = 0 where the annulus barrier is not differentiable."""


class SingularConfiguration(McfLabError, ArithmeticError):
    """I - uA is (numerically) singular or 1 + |Du|^2 is not finite."""


class RootBracketFailure(McfLabError, RuntimeError):
    """A bracketed root search found no sign change."""


class NotMonotone(McfLabError, ValueError):
    pass


class NoRoot(McfLabError, ValueError):
    pass


class InactiveNode(McfLabError, IndexError):
    """The requested node is a boundary node or sits on the truncation cap."""


class NumericFailure(McfLabError, RuntimeError):
    """Base class for failures of a numerical run (CLI exit code 3)."""


class StepRejected(NumericFailure):
    pass


class NotComplete(NumericFailure):
    """Initial data does not diverge at the edge of its domain."""


class EmptyShadow(NumericFailure):
    pass


class WindowEmpty(NumericFailure):
    pass


class PreconditionFailed(McfLabError, ValueError):
    pass


class UsageError(McfLabError):
    exit_code = 2
