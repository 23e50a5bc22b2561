"""Exception types shared across the package."""


class TsvizError(Exception):
    """Base class for all errors raised by tsviz."""


class DimensionError(TsvizError, ValueError):
    """Tensor shapes disagree.

    ``axis`` names the offending axis (or layer path) when known.
    """

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class ParameterError(TsvizError, ValueError):
    """An argument is outside its allowed range."""


class ContractError(TsvizError, RuntimeError):
    """An operation was called in a state that violates its contract."""


class FormatError(TsvizError, ValueError):
    """A file could not be parsed (bad magic, malformed header, truncation)."""


class CheckpointVersionError(FormatError):
    pass


class CheckpointShapeError(TsvizError, ValueError):
    """A checkpoint does not match the model it is loaded into."""


class DivergenceError(TsvizError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
