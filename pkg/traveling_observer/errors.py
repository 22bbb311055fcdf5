"""
traveling_observer.errors
"""
from __future__ import annotations
from typing import Optional


class TomError(Exception):
    """
    Base class for every error raised by the engine.
    """


class ShapeError(TomError, ValueError):
    """
    Raised when two arrays that must agree in shape do not.
    """


class UnknownVariableError(TomError, KeyError):
    """
    Raised when a variable id has no embedding, or when an observed
    variable set contains duplicates.
    """


class UnknownTaskError(TomError, KeyError):
    """
    Raised when a per-task head is requested for an unregistered task.
    """


class FactorizationError(TomError, ArithmeticError):
    """
    Raised when a covariance matrix cannot be factorized even after
    jitter escalation.
    """


class FormatError(TomError, ValueError):
    """
    Raised for malformed data or checkpoint files.

    :param message: What went wrong.
    :param path: The offending file.
    :param offset: Byte offset (binary files) or line number (text files).
    """
    def __init__(
            self,
            message: str,
            path: Optional[str] = None,
            offset: Optional[int] = None
    ) -> None:
        self.path = path
        self.offset = offset
        where = ""
        if path is not None:
            where = f"{path}"
            if offset is not None:
                where += f" @ {offset}"
            where += ": "
        super().__init__(f"{where}{message}")


class ConfigError(TomError, ValueError):
    """
    Raised when a configuration file or override cannot be parsed or
    validated.
    """
    def __init__(
            self,
            message: str,
            path: Optional[str] = None,
            line: Optional[int] = None,
            key: Optional[str] = None
    ) -> None:
        self.path = path
        self.line = line
        self.key = key
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if key is not None:
            parts.append(f"key '{key}'")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
