"""Exception hierarchy shared by every module."""


class PathFramesError(Exception):
    """Base class for all errors raised by pathframes."""


class ArgumentError(PathFramesError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(PathFramesError):
    """A point, or a finite-difference stencil around it, left the chart box."""


class DegeneracyError(PathFramesError):
    """A frame or transition matrix is singular where it must be invertible."""


class EvaluationError(PathFramesError):
    """A user-supplied field returned non-finite values."""


class GeometryError(PathFramesError):
    """A tube map or path violates injectivity."""


class ConstructionError(PathFramesError):
    """A construction finished but its defining residual exceeds tolerance."""


class NotAConnectionError(PathFramesError):
    """The derivation is not linear in X along the path."""


class ConfigError(PathFramesError):
    """Malformed or unknown scenario configuration."""
