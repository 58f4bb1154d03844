"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ConvergenceError(RuntimeError):
    """A root finder could not bracket or converge on its target."""
