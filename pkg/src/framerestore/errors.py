"""Exception hierarchy shared across the package.

Each class carries the CLI exit code it maps to.
"""

from __future__ import annotations


class FrameRestoreError(Exception):
    exit_code = 1


class ConfigError(FrameRestoreError, ValueError):
    exit_code = 2


class DataError(FrameRestoreError, ValueError):
    exit_code = 3


class ValidationError(DataError):
    """Raster or record content outside its declared domain."""


class ParameterError(ConfigError):
    """A degradation parameter is outside its documented range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ShapeError(DataError):
    pass


class NumericError(FrameRestoreError, ArithmeticError):
    exit_code = 4
