"""Exception types shared across the package.

Every failure mode that callers are expected to handle programmatically gets
its own class; ensemble drivers catch the narrow types (ClosedLineError,
DisconnectedGraphError) and re-seed, while the CLI maps the broad ones to
distinct exit codes.
"""


class RcmlabError(Exception):
    """Base class for package errors."""


class ConfigError(RcmlabError):
    """Invalid run configuration; message carries the dotted field path."""


class ScanLimitError(RcmlabError):
    """An axis scan exhausted its budget without finding an open site.

    Raised instead of silently truncating: at the default budget the
    probability of a legitimate gap this long is below 2^-64 per query.
    """


class ResourceLimitError(RcmlabError):
    """A requested object exceeds a configured memory/size budget."""


class ClosedLineError(RcmlabError):
    """A torus line contains no open site, so periodization is ill-posed
    for this (seed, radius); the caller may re-seed."""


class DisconnectedGraphError(RcmlabError):
    """Operation requires a connected graph."""


class UnreachableError(RcmlabError):
    """A pairwise distance query had no path between its endpoints."""


class EigensolverError(RcmlabError):
    """An iterative eigensolve failed to converge; message has the residual."""


class TruncationError(RcmlabError):
    """A working box was too small to certify the requested quantity."""


class SolverError(RcmlabError):
    """An iterative linear solve exhausted its iteration budget."""
