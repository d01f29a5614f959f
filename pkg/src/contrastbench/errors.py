"""Exception hierarchy shared across modules.

The three bases map to CLI exit codes: ValidationError -> 1,
InputError -> 2, AuditViolation -> 3.
"""


class ContrastBenchError(Exception):
    """Base class for all package errors."""


class ValidationError(ContrastBenchError):
    """Bad arguments, bad values, or a violated precondition."""


class InputError(ContrastBenchError):
    """Missing, unreadable, or structurally corrupt input file."""


class AuditViolation(ContrastBenchError):
    """Data that violates a stated invariant."""
