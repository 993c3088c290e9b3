"""Exception types shared across the package."""

from __future__ import annotations


class GaussentError(Exception):
    """Base class for computation failures (CLI exit status 1)."""


class ConvergenceError(GaussentError, ArithmeticError):
    """An iterative kernel hit its iteration cap.

    Parameters
    ----------
    message : str
        Human-readable diagnostic.
    residual : float, optional
        Size of the unconverged quantity relative to the matrix scale.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")
        self.residual = residual


class SingularMatrixError(GaussentError, ArithmeticError):
    """A matrix that must be invertible has a zero pivot."""


class NotPositiveDefiniteError(GaussentError, ArithmeticError):
    """Cholesky factorization met a non-positive pivot."""


class ComplexSpectrumError(GaussentError, ArithmeticError):
    """An eigenvalue expected to be real carries an imaginary part above tolerance."""


class PrecisionError(GaussentError):
    """Two independent routes disagree beyond the working tolerance."""


class NotBonafideError(GaussentError):
    """A covariance matrix violates the uncertainty relation."""


class DegenerateSpectrumError(GaussentError):
    """Eigenvalues coincide to tolerance where a unique basis is required."""

    def __init__(self, message: str, cluster: list | None = None):
        super().__init__(message)
        self.cluster = cluster or []


class ConsolidationError(GaussentError):
    """Consolidated pair negativities do not reproduce the spectral contributions."""
