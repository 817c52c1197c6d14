class NumericalOverflowError(FloatingPointError):
    """Raised when a pointwise evaluation produces non-finite values."""

    def __init__(self, message, t=None):
        if t is not None:
            message = f"{message} (t={t:.17g})"
        super().__init__(message)
        self.t = t


class StepSizeError(ValueError):
    """Raised when the positivity guard of an implicit solve is violated."""

    def __init__(self, message, t=None):
        if t is not None:
            message = f"{message} (t={t:.17g})"
        super().__init__(message)
        self.t = t


class ConfigError(ValueError):
    """Invalid experiment configuration; names the offending field."""

    def __init__(self, field, message, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {message}{where}")
        self.field = field
        self.line = line
