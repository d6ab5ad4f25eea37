"""Exception types raised across the package.

All of them derive from :class:`BridgeFuseError` (itself a ``ValueError``)
so callers can catch the family in one place; the CLI maps them to exit
code 2.
"""

from __future__ import annotations


class BridgeFuseError(ValueError):
    pass


class ParseError(BridgeFuseError):
    """Malformed input text; carries 1-based ``line``/``column`` when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class SchemaError(BridgeFuseError):
    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message)


class ValidationError(BridgeFuseError):
    pass


class FormatError(BridgeFuseError):
    pass


class CsvParseError(BridgeFuseError):
    def __init__(self, message: str, row: int):
        self.row = row
        super().__init__(f"row {row}: {message}")


class SpecError(BridgeFuseError):
    pass


class InputError(BridgeFuseError):
    pass


class DegenerateSignalError(BridgeFuseError):
    pass


class CausalityError(BridgeFuseError):
    pass


class DegenerateDataError(BridgeFuseError):
    pass


class DegenerateGeometryError(BridgeFuseError):
    pass


class MappingError(BridgeFuseError):
    pass


class UsageError(BridgeFuseError):
    pass
