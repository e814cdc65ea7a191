"""Exception types raised by the simulator."""


class ConfigError(ValueError):
    """A run description violates one of its invariants."""


class ProtocolError(RuntimeError):
    """A protocol stage was invoked out of order or in the wrong mode."""


class NumericalError(RuntimeError):
    """The integration produced non-finite values."""
