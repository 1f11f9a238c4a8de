"""Shared exception types."""


class ShapeError(ValueError):
    """Operand shapes are inconsistent for the requested operation."""


class ConfigError(ValueError):
    """A configuration value violates its contract."""


class DivergenceError(RuntimeError):
    """The optimization loss became non-finite."""

    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite loss {value!r} at iteration {iteration}")
        self.iteration = iteration
        self.value = value
