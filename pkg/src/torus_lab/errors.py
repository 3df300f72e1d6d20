"""Exception hierarchy shared by every module of the lab."""


class TorusLabError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""


class SingularMatrixError(TorusLabError, ZeroDivisionError):
    pass


class GapViolationError(TorusLabError):
    """A ratio matrix A_{n+1} A_n^{-1} failed to be expanding."""

    def __init__(self, index: int, detail: str = ""):
        self.index = index
        msg = f"ratio A_{index + 1} A_{index}^-1 is not expanding"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CapacityError(TorusLabError):
    """An enumeration would exceed its configured cap."""


class PrecisionError(TorusLabError):
    """Sample precision too small for the requested orbit length."""

    def __init__(self, have: int, need: int):
        self.have = have
        self.need = need
        super().__init__(
            f"precision_bits={have} is below the required {need} "
            f"(2N+64); raise it or set precision_override"
        )


class ConfigError(TorusLabError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field '{field}': {message}")
