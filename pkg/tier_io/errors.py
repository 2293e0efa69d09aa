class ToolkitError(Exception):
    exit_code = 1


class InvalidArgument(ToolkitError, ValueError):
    exit_code = 2


class ConfigError(ToolkitError):
    exit_code = 2


class DataError(ToolkitError):
    exit_code = 3


class TraceFormatError(DataError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f'line {line_no}: {message}'
        super().__init__(message)


class EmptyResultError(DataError):
    pass


class InternalError(ToolkitError):
    exit_code = 1
