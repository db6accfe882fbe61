"""Exceptions raised by the exporter."""


class ExportError(Exception):
    """Base class for exporter failures."""


class InputFormatError(ExportError):
    """An input file does not follow the documented format.

    Carries optional path/line context rendered as ``path:line: message``.
    """

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class EncoderLoadFailure(ExportError):
    """The requested encoder could not be constructed or loaded."""
