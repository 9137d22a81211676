"""Exception types shared across the package."""


class SchwarzRomError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(SchwarzRomError):
    """Invalid mesh, experiment, or solver configuration."""


class InvertedElementError(SchwarzRomError):
    """An element stretch became non-positive under a logarithmic-strain model.

    Carries the offending element id so convergence failures can be traced
    back to the mesh location instead of being silently clamped.
    """

    def __init__(self, element_id, stretch):
        self.element_id = int(element_id)
        self.stretch = float(stretch)
        super().__init__(
            f"element {self.element_id} inverted: stretch {self.stretch:.6e} <= 0"
        )


class StepFailureError(SchwarzRomError):
    """Newton iteration failed to converge within the allowed iterations."""

    def __init__(self, residual_norm, iterations, message=""):
        self.residual_norm = float(residual_norm)
        self.iterations = int(iterations)
        msg = (
            f"Newton did not converge after {self.iterations} iterations "
            f"(last residual norm {self.residual_norm:.6e})"
        )
        if message:
            msg = f"{msg}: {message}"
        super().__init__(msg)


class IntervalFailureError(SchwarzRomError):
    """Schwarz iteration failed to converge within a controller time interval."""

    def __init__(self, interval_index, iterations, increment_norms):
        self.interval_index = int(interval_index)
        self.iterations = int(iterations)
        self.increment_norms = tuple(float(x) for x in increment_norms)
        super().__init__(
            f"Schwarz iteration exceeded {self.iterations} sweeps in interval "
            f"{self.interval_index}; last increment norms (u, v, a) = "
            f"{self.increment_norms}"
        )


class StageError(SchwarzRomError):
    """A pipeline stage failed; carries the stage name for exit-code mapping."""

    def __init__(self, stage, message):
        self.stage = str(stage)
        super().__init__(f"stage '{self.stage}' failed: {message}")
