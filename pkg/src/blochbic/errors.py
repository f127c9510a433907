"""Exception types shared across the package."""


class InvalidNomeError(ValueError):
    """Theta-series nome outside [0, 1)."""


class DomainError(ValueError):
    """Operation evaluated outside its domain of validity."""


class PoleProximityError(ValueError):
    """Energy too close to a reaction-region eigenvalue.

    Carries the offending eigenvalue in ``.eigenvalue``.
    """

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class SingularMatrixError(RuntimeError):
    """Linear solve failed; carries a condition-number diagnostic."""

    def __init__(self, message, condition_number):
        super().__init__(f"{message} (condition number ~ {condition_number:.3e})")
        self.condition_number = condition_number


class TrackingError(RuntimeError):
    """State or pole tracking lost between steps of a sweep."""


class EigensolverError(RuntimeError):
    """Dense eigensolver failed to converge; carries the matrix size."""

    def __init__(self, message, size):
        super().__init__(f"{message} (matrix size {size}x{size})")
        self.size = size
