"""Exception types shared across the library."""


class FwdApproxError(Exception):
    """Base class for all library-specific errors."""


class GridMismatch(FwdApproxError):
    """Two curves live on incompatible grids and resampling is disabled."""


class DomainTooShort(FwdApproxError):
    """A curve's grid does not cover the range an operation needs."""


class NotSmoothEnough(FwdApproxError):
    """A curvature quadrature failed to stabilise under grid refinement."""


class UnstableStep(FwdApproxError):
    """The explicit Euler step size violates the linear stability bound."""


class BadWindow(FwdApproxError):
    """A delivery window violates the ordering t <= T1 < T2 <= horizon."""


class ConfigError(FwdApproxError):
    """An experiment configuration failed validation."""
