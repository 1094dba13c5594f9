"""Exception types shared across the library."""


class SympflowError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SympflowError):
    """Invalid grid, config file, or operator arguments."""


class NumericalError(SympflowError):
    """Runtime numerical failure (blow-up, CFL violation, non-convergence)."""

    def __init__(self, message: str, *, time: float | None = None,
                 residual: float | None = None):
        if time is not None:
            message = f"{message} (t = {time:.6g})"
        if residual is not None:
            message = f"{message} (worst residual = {residual:.3e})"
        super().__init__(message)
        self.time = time
        self.residual = residual
