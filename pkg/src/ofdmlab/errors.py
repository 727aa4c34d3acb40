"""Exception taxonomy shared by the library and the CLI exit-code mapping."""


class OfdmLabError(Exception):
    """Base class for all library errors."""


class ParameterError(OfdmLabError, ValueError):
    """An argument is outside its documented domain."""


class FramingError(OfdmLabError, ValueError):
    """Bit counts, grid shapes, or buffer lengths do not line up."""


class SyncNotFoundError(OfdmLabError, RuntimeError):
    """Preamble correlation peak below the detection threshold."""


class EstimationError(OfdmLabError, RuntimeError):
    """Channel/noise estimation has too little input to work with."""


class SingularityError(OfdmLabError, ArithmeticError):
    """Equalizer denominator vanished."""


class NumericError(OfdmLabError, ArithmeticError):
    """Non-finite values appeared in a numeric pipeline."""


class FormatError(OfdmLabError, ValueError):
    """A serialized file is malformed; carries a byte offset when known."""

    def __init__(self, message, offset=None, record_index=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if record_index is not None:
            message = f"{message} (record {record_index})"
        super().__init__(message)
        self.offset = offset
        self.record_index = record_index


class ConfigError(OfdmLabError, ValueError):
    """Experiment configuration file is invalid."""
