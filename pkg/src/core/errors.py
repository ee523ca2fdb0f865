# -*- coding: utf-8 -*-
"""
Errors - exception hierarchy shared by every pipeline stage
"""


class PromptSteerError(Exception):
    """Base class for all pipeline errors"""


class ShapeError(PromptSteerError, ValueError):
    """Rank, dimension or channel mismatch"""


class DegenerateInputError(PromptSteerError, ValueError):
    """Zero-norm vector, empty prompt or similar unusable input"""


class EmptyInputError(PromptSteerError, ValueError):
    """An operation received an empty collection it cannot work on"""


class PlacementError(PromptSteerError, RuntimeError):
    """Scene layout could not be sampled within the attempt budget"""


class UndefinedMetricError(PromptSteerError, ValueError):
    """Metric requested where no ground truth exists"""


class UsageError(PromptSteerError):
    """Bad command line (exit code 1)"""


class DataError(PromptSteerError):
    """Bad input data, schema or configuration (exit code 2)"""


class ParseError(DataError):
    """Input is not well-formed (malformed JSON, bad UTF-8)"""


class SchemaError(DataError):
    """Well-formed input with missing, extra or mistyped fields"""


class FileFormatError(DataError):
    """Binary file with bad magic, version or payload size"""


class ConfigError(DataError):
    """Invalid configuration value"""


class SeedError(ConfigError, ValueError):
    """Seed outside the unsigned 64-bit range"""


class NonFiniteError(PromptSteerError, ValueError):
    """NaN or infinity where finite values are required"""
