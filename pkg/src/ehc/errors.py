"""Exception hierarchy. Each class maps to one CLI exit code."""


class EHCError(Exception):
    exit_code = 1


class UsageError(EHCError, ValueError):
    """Caller violated an operation's precondition."""

    exit_code = 2


class ConfigError(EHCError):
    exit_code = 2


class NotFoundError(EHCError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class BackendError(EHCError):
    """The language-model backend failed (transport or non-2xx status)."""

    exit_code = 3

    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class ProtocolError(BackendError):
    """The backend answered, but the response shape was not understood."""


class FormatError(EHCError):
    exit_code = 4

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else ''}line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path
