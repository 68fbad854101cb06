"""Exception types shared across the lab."""


class InvariantViolation(ValueError):
    """A domain value failed one of its structural invariants."""


class GridMismatch(ValueError):
    """Operands live on different grids."""


class SolverError(RuntimeError):
    """An iterative solver failed to meet its residual contract."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
