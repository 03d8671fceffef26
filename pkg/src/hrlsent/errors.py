"""Exception hierarchy shared by the library and the CLI.

Every error carries a short machine-parsable ``category`` and the process exit
code the CLI maps it to.
"""


class HrlError(Exception):
    category = "error"
    exit_code = 1


class UsageError(HrlError):
    category = "usage"
    exit_code = 2


class ShapeError(HrlError, ValueError):
    category = "dimension"
    exit_code = 3


class DomainError(HrlError, ValueError):
    category = "domain"
    exit_code = 3


class FormatError(HrlError, ValueError):
    category = "format"
    exit_code = 3

    def __init__(self, message, line=None, field=None):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field {field!r}")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.field = field


class StateError(HrlError, RuntimeError):
    category = "state"
    exit_code = 4


class NumericError(HrlError, FloatingPointError):
    category = "numeric"
    exit_code = 5
