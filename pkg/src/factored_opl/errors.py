"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a config asks for something the instance cannot provide."""


class CapacityError(ValueError):
    """Raised when a requested enumeration or sample size exceeds a hard cap."""


class UnsupportedActionError(KeyError):
    """Raised when a model restricted to existing actions is queried on a new one."""


class EstimatorPreconditionError(ValueError):
    """Raised when logged data violates an estimator's precondition (e.g. zero propensity)."""


class NumericError(ArithmeticError):
    """Raised on non-finite intermediate values (overflowing logits, diverged gradients)."""


class ParseError(ValueError):
    """Raised on malformed input files; message carries file and line."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
