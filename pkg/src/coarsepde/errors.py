"""Exception types shared across the package."""


class CoarsePdeError(Exception):
    """Base class for package errors."""


class ConfigError(CoarsePdeError):
    """Invalid or inconsistent configuration / input data."""


class DataFormatError(CoarsePdeError):
    """Dataset files are missing, truncated, or inconsistent."""


class CflViolationError(CoarsePdeError):
    """Time step violates the stability bound of a solver."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(
            f"dt={dt:g} violates the CFL bound; use dt <= {dt_max:g}"
        )


class BlowUpError(CoarsePdeError):
    """A field became non-finite or unbounded during integration."""

    def __init__(self, time: float, detail: str = ""):
        self.time = time
        msg = f"solution blew up at t={time:g}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DisconnectedKernelError(CoarsePdeError):
    """Kernel graph is numerically disconnected; epsilon too small."""


class TrainingDivergedError(CoarsePdeError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(
            f"training loss became non-finite at epoch {epoch}, batch {batch}"
        )
