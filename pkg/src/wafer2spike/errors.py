"""Exception types shared across the package."""


class Wafer2SpikeError(Exception):
    pass


class DimensionError(Wafer2SpikeError, ValueError):
    """Operand shapes do not agree."""


class GeometryError(Wafer2SpikeError, ValueError):
    """Convolution geometry yields an empty output."""


class ContractError(Wafer2SpikeError, RuntimeError):
    """A documented precondition was violated (missing cache, non-binary spikes, ...)."""


class NumericError(Wafer2SpikeError, FloatingPointError):
    pass


class InputError(Wafer2SpikeError, ValueError):
    pass


class ConfigError(Wafer2SpikeError, ValueError):
    pass


class FormatError(Wafer2SpikeError, ValueError):
    """Malformed binary container. ``offset`` is the byte position of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
