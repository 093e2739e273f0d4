"""Error hierarchy shared by the library and the command line.

Every error carries a human readable ``detail`` and the process ``exit_code``
the CLI should terminate with.
"""


class ChshRatesError(Exception):
    exit_code = 4

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(ChshRatesError):
    exit_code = 2


class CurveMismatchError(ChshRatesError):
    exit_code = 3


class DomainError(ChshRatesError):
    """An argument lies outside the documented domain of an operation."""


class NumericError(ChshRatesError):
    def __init__(self, detail: str, quantity: str | None = None):
        super().__init__(detail if quantity is None else f"{detail} (quantity={quantity})")
        self.quantity = quantity


class InfeasibleError(ChshRatesError):
    def __init__(self, detail: str, omega: float):
        super().__init__(f"{detail} (omega={omega!r})")
        self.omega = omega


class CurveError(ChshRatesError):
    pass
