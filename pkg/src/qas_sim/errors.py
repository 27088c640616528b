"""Exception types shared across the package."""


class TruncationError(RuntimeError):
    """A Fock-space cutoff is too small for the requested tail tolerance."""

    def __init__(self, message: str, required_cutoff: int | None = None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class NumericFailureError(RuntimeError):
    """A numerical operation failed on input that should have been benign."""


class DegenerateUpdateError(RuntimeError):
    """A Bayes update zeroed the posterior everywhere on the grid."""


class DegenerateChainError(RuntimeError):
    """A Metropolis chain was started in a zero-probability state."""


class SingularEstimatorError(ValueError):
    """The intensity estimator carries no first-order information here."""


class PoleError(ValueError):
    """Closed-form expression evaluated at a pole of its domain."""
