"""Exception types shared across the package."""


class CayleyError(Exception):
    """Base class for all package-specific errors."""


class DomainError(CayleyError, ValueError):
    """Input lies outside the mathematical domain of an operation.

    Examples: a Grassmann coordinate vector with an eigenvalue of A^T A
    at or above 1, or a Stiefel point whose top block makes I + Q1 singular.
    """


class ConditioningError(CayleyError, ArithmeticError):
    """A linear solve or factorization failed at working precision.

    Raised when a reciprocal condition number estimate falls below the
    cutoff (1e-14) or a Cholesky-type factorization of a matrix that
    should be positive definite fails. Distinct from DomainError: the
    input was mathematically valid but numerically unusable.
    """
