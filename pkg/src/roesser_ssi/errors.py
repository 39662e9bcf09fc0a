"""Exception hierarchy.

Input/configuration problems derive from :class:`InputError`, numerical
breakdowns from :class:`NumericalError`. The CLI maps them to exit codes 1
and 2 respectively.
"""


class InputError(ValueError):
    """Malformed model, grid, or configuration."""


class GridSizeError(InputError):
    """Grid extents incompatible with the requested block sizes."""


class NumericalError(RuntimeError):
    """A numerical procedure could not produce a trustworthy answer."""


class IllConditionedError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class RankDeficiencyError(NumericalError):
    def __init__(self, message, rank=None, size=None):
        super().__init__(message)
        self.rank = rank
        self.size = size


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class OrderSelectionError(NumericalError):
    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values
