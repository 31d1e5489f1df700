"""Exception hierarchy shared by all pivotlab modules."""


class PivotLabError(Exception):
    """Base class for all pivotlab errors."""


class InvalidArgument(PivotLabError, ValueError):
    pass


class StaleTableError(PivotLabError):
    """An event table was reused with a grid or kernel it was not built for."""


class NumericalFailure(PivotLabError, ArithmeticError):
    """A non-finite value appeared during time integration."""

    def __init__(self, message, step=None, cell=None):
        super().__init__(message)
        self.step = step
        self.cell = cell


class IntegrationFailure(NumericalFailure):
    """Negativity beyond tolerance under the ``abort`` policy."""


class UndefinedRelativeError(PivotLabError, ZeroDivisionError):
    pass


class UnsupportedCombination(PivotLabError):
    """Requested (kernel, initial condition) pair has no closed-form reference."""


class ConfigError(PivotLabError):
    pass
