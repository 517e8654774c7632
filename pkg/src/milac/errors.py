"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input broke a documented precondition."""


class NumericFailure(ArithmeticError):
    """A numerical routine failed (singular system, non-convergence)."""


class ParseError(ValueError):
    """A channel or config file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    """Invalid experiment configuration (carries the offending key path)."""

    def __init__(self, message, key=None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key
