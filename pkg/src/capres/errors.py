"""Exception types shared across the package."""


class CapresError(Exception):
    """Base class for package-specific failures."""


class DomainTooSmallError(CapresError, ValueError):
    """Computational box does not enclose the region an assembly requires."""


class InvalidConfigurationError(CapresError, ValueError):
    """Operator or profile parameters violate an assembly precondition."""


class ResourceLimitError(CapresError, RuntimeError):
    """Request exceeds the dense-solver budget."""


class NumericalFailureError(CapresError, RuntimeError):
    """An underlying numerical routine failed to converge."""


class ContourTouchesSpectrumError(CapresError, RuntimeError):
    """A quadrature contour runs too close to an eigenvalue."""


class RefineContourError(CapresError, RuntimeError):
    """Argument tracking could not be resolved at the allowed refinement depth."""


class BranchAmbiguityError(CapresError, ValueError):
    """Determinant evaluation requested on the square-root branch cut."""


class NoConvergenceError(CapresError, RuntimeError):
    """Root refinement diverged or oscillated; carries the iterate trace."""

    def __init__(self, message, iterates=()):
        super().__init__(message)
        self.iterates = list(iterates)


class InvalidCutoffError(CapresError, ValueError):
    """Cutoff support is incompatible with the operation's requirements."""


class QuasimodeIndependenceError(CapresError, RuntimeError):
    """Quasimode family fails the Gram-matrix independence threshold."""


class ConfigError(CapresError, ValueError):
    """Run configuration failed to parse or validate."""
