"""Exception taxonomy shared by the library and the CLI.

Exit-code mapping used by the CLI: ConfigError -> 1, DataError (and
subclasses) -> 2, ConvergenceError -> 3.
"""


class FlowgateError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FlowgateError):
    """Invalid configuration or command usage."""


class DataError(FlowgateError):
    """Malformed, empty, or otherwise unusable data."""


class ParseError(DataError):
    """CSV parse failure; carries a 1-based row number when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ProtocolError(DataError):
    """Split-protocol constraint cannot be satisfied."""


class ConvergenceError(FlowgateError):
    """Iterative solver exhausted its budget; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
