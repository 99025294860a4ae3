"""
Exception hierarchy shared by every layer.
"""
from __future__ import annotations


class HJLabError(Exception):
    """Base class for all lab errors."""


class ArgumentError(HJLabError, ValueError):
    pass


class ConfigError(ArgumentError):
    pass


class ContractError(ArgumentError):
    """A solver was handed a model or input outside its contract."""


class OrientationError(ArgumentError):
    pass


class EmptyDomainError(HJLabError):
    pass


class EnvelopeInfeasibleError(HJLabError):
    """Query covector outside the hull of the envelope points (envelope is infinite there)."""


class CapabilityError(HJLabError):
    pass


class BlowUpError(HJLabError):
    def __init__(self, message: str, last_time: float):
        super().__init__(f"{message} (last valid time {last_time:.6g})")
        self.last_time = last_time


class HorizonError(HJLabError):
    def __init__(self, generator_id: int, caustic_time: float, t: float, hint: str = ""):
        message = f"generator {generator_id} loses injectivity at t={caustic_time:.6g} <= requested t={t:.6g}"
        if hint:
            message = f"{message}; {hint}"
        super().__init__(message)
        self.generator_id = generator_id
        self.caustic_time = caustic_time
        self.t = t


class StabilityError(HJLabError):
    pass


class SolverStageError(HJLabError):
    """Wraps a solver failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
