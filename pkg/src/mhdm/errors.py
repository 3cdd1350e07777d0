"""Exception types shared across the package."""


class NumericalFailure(RuntimeError):
    """An iterative routine failed to produce a usable value."""

    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class UnsupportedCombination(ValueError):
    """The requested penalty/operator pairing has no solver."""


class SolverFailure(RuntimeError):
    """An engine run aborted; ``partial`` holds the decomposition so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConfigError(ValueError):
    """An experiment configuration could not be resolved."""
