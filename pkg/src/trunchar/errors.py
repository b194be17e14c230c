"""Exception and warning types raised across the package."""


class DomainError(ValueError):
    """Parameters fall outside the region where a formula is valid."""


class PoleError(DomainError):
    """A Gamma-function argument hits a pole (non-positive value)."""


class InsufficientNodesError(ValueError):
    """A deterministic quadrature rule cannot be exact with the requested node count."""


class ConvergenceWarning(RuntimeWarning):
    """A truncated series does not appear to converge."""
