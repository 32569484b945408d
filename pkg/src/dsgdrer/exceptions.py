"""Exception types shared across the package."""


class ConvergenceError(ArithmeticError):
    """An iterative kernel hit its iteration cap."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class NotPositiveDefiniteError(ValueError):
    pass


class UnstableSystemError(ValueError):
    pass


class InvalidTopologyError(ValueError):
    """A mixing matrix failed one of the topology checks; ``check`` names it."""

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class DivergenceError(FloatingPointError):
    """An estimate became non-finite or exceeded the magnitude guard."""

    def __init__(self, message, buffer=None, step=None):
        super().__init__(message)
        self.buffer = buffer
        self.step = step


class ConfigError(ValueError):
    pass
