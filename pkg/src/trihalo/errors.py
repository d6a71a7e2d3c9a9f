"""Exception types shared across the package."""


class TrihaloError(Exception):
    """Base class for all trihalo errors."""


class ConfigurationError(TrihaloError):
    """A face configuration violates a structural constraint (k > p, bad segment, ...)."""


class ContractViolationError(TrihaloError):
    """A buffer or operator does not match the shape/layout its consumer requires."""


class SingularFitError(TrihaloError):
    """A least-squares fit is rank deficient."""

    def __init__(self, column: int, message: str):
        super().__init__(message)
        self.column = column


class StencilInfeasibleError(TrihaloError):
    """The source region cannot supply a stencil for the requested order."""
