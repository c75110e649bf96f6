import numpy as np


class DyncacheError(Exception):
    """Base class for every error raised by dyncache."""


class ConstraintViolation(DyncacheError, ValueError):
    """A network or design parameter breaks a feasibility inequality."""


class NonIntegerTBar(ConstraintViolation):
    """P * gamma is not an integer, so the placement is undefined."""


class EmptyNetwork(DyncacheError, ValueError):
    pass


class CounterExhausted(DyncacheError, RuntimeError):
    """A (user, subset) subpacket counter ran past S."""


class EmptySchedule(DyncacheError, ZeroDivisionError):
    pass


class NonConvergenceError(DyncacheError, RuntimeError):

    def __init__(self, message: str, diagnostics: dict = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleZero(DyncacheError, RuntimeError):
    pass


class RankDeficiency(DyncacheError, np.linalg.LinAlgError):
    pass


class EmptyResults(DyncacheError, ValueError):
    pass
