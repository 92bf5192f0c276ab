"""Exception types. The CLI maps each to its exit code."""


class KisError(Exception):
    exit_code = 1


class DataError(KisError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 2


class ConfigError(KisError, ValueError):
    """Invalid parameters, incompatible model/data, or unreadable model file."""

    exit_code = 4


class SolverStalled(KisError, RuntimeError):
    """The interior point loop stopped making progress.

    ``result`` carries whatever the solver had when it gave up (for training,
    the model built from the best iterate).
    """

    exit_code = 3

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DomainError(KisError, ValueError):
    """Target points fall outside the torus region a fast-summation plan covers."""
