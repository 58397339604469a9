"""
QWED-TopoBO error taxonomy.

Every failure the library can report maps onto one exception class, and every
class carries the process exit code the CLI uses for it:

  - InputError        (2) — a caller passed an invalid argument or config.
  - DataError         (3) — a pool, cache or XYZ file has invalid content.
  - NumericalError    (4) — a factorization or statistic is undefined.
  - ResourceError     (5) — a computation would exceed its configured budget.

Input and data errors subclass ``ValueError`` so callers that only know the
builtin contract still catch them.
"""

from typing import Optional


class TopoBOError(Exception):
    """Base class for all qwed-topobo failures."""

    exit_code = 1


class InputError(TopoBOError, ValueError):
    """An argument, flag or object violates its documented precondition."""

    exit_code = 2


class ConfigError(InputError):
    """A RunConfig combines options that contradict each other."""


class DataError(TopoBOError, ValueError):
    """Loaded data is inconsistent (empty pool, duplicate id, mixed dimension)."""

    exit_code = 3


class DataParseError(DataError):
    """A file could not be parsed. Carries the path and 1-based line number."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class NumericalError(TopoBOError, ArithmeticError):
    """A numerical procedure failed (factorization, undefined statistic)."""

    exit_code = 4


class AlignmentUndefinedError(NumericalError):
    """Kernel alignment is undefined because a centered Gram matrix is zero."""


class ResourceError(TopoBOError, MemoryError):
    """A computation would exceed its resource budget."""

    exit_code = 5
