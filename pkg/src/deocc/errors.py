"""Exception hierarchy shared by the whole pipeline."""


class DeoccError(Exception):
    """Base class for all pipeline errors."""


class ContractError(DeoccError):
    """An input violates an operation's preconditions (dims, binariness, range)."""


class FormatError(DeoccError):
    """A file is not in the expected on-disk format."""


class PlacementError(DeoccError):
    """An occlusion placement leaves no visible patch pixels."""


class ConvergenceError(DeoccError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class NumericalError(DeoccError):
    """A computation produced non-finite values."""
