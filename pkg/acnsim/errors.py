class AcnError(Exception):
    """Base class for every error raised by acnsim."""


class SceneError(AcnError, ValueError):
    """The node placement or the propagation parameters describe an invalid scene."""


class AnalyticDomainError(AcnError, ValueError):
    """A closed form was requested outside the assumptions it was derived under."""


class NumericalFailure(AcnError, ArithmeticError):
    """Quadrature did not reach the requested tolerance."""

    abserr: float

    def __init__(self, message: str, abserr: float = float("nan")) -> None:
        super().__init__(message)
        self.abserr = abserr


class ConfigError(AcnError, ValueError):
    """The config document is malformed; the message names the offending key."""

    key: str

    def __init__(self, key: str, constraint: str) -> None:
        super().__init__(f"{key}: {constraint}")
        self.key = key


class UnknownProtocolError(AcnError, KeyError):
    pass
