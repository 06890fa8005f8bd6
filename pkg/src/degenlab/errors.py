"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RegimeError(ValueError):
    """An operation was invoked for the wrong growth regime of p."""


class PreconditionError(ValueError):
    """A stated precondition (parameter range, hypothesis) is violated."""


class BranchMismatchError(ValueError):
    """A Moser-sequence branch does not match the exponent regime."""


class EmptyCylinderError(ValueError):
    """A parabolic cylinder contains no grid nodes."""


class BlowUpError(RuntimeError):
    """The explicit scheme produced values beyond the blow-up threshold."""
