"""Exceptions raised by the primerace library.

Each exception carries the exit code the command-line tools report for it:
2 for invalid arguments, 3 for I/O failures, 4 for invalid data.
"""


class Error(Exception):
    """Base class for other exceptions"""
    exit_code = 1


class UsageError(Error):
    """Raised when an argument is outside an operation's domain."""
    exit_code = 2


class InvalidModulusError(UsageError):
    """Raised for a modulus k < 3."""
    pass


class InvalidResidueError(UsageError):
    """Raised for residues that are not reduced, or are repeated."""
    pass


class InvalidPartitionError(UsageError):
    """Raised when residue sets for a union race overlap or are empty."""
    pass


class UntrackedResidueError(UsageError):
    """Raised when a residue is not tracked by a race."""
    pass


class DomainError(UsageError):
    """Raised when x, u, z or a tuning parameter is out of range."""
    pass


class UnsupportedCharacterError(UsageError):
    """Raised when an operation is asked for the principal character."""
    pass


class CostLimitError(UsageError):
    """Raised when an enumeration would exceed its cost limit."""
    pass


class TailNotNegligibleError(UsageError):
    """Raised when a truncated series would drop a non-negligible tail."""
    pass


class SieveAbortedError(Error):
    """Raised when an event consumer fails part way through a sieve run.

    :param boundary: every n < boundary was delivered before the failure.
    """
    exit_code = 3

    def __init__(self, message, boundary):
        super().__init__(message)
        self.boundary = boundary


class DataError(Error):
    """Raised when input data is inconsistent."""
    exit_code = 4


class ZeroFileError(DataError):
    """Raised if a zero or barrier file cannot be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class InsufficientDataError(DataError):
    """Raised when data does not cover the requested height or range."""
    pass


class OffLineZeroError(DataError):
    """Raised when zeros off the critical line reach an on-line computation."""
    pass


class BarrierSpecError(DataError):
    """Raised if a barrier specification violates its ordering of real parts."""
    pass


class CheckpointError(DataError):
    """Raised if a checkpoint file is damaged or belongs to another run."""
    pass
