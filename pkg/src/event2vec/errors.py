"""Exception hierarchy shared across the package.

Every error raised intentionally by this package derives from
:class:`Event2VecError`, so callers can catch one type at the boundary.
The CLI maps subclasses to distinct exit codes.
"""

from __future__ import annotations


class Event2VecError(Exception):
    """Base class for all errors raised by event2vec."""


class UsageError(Event2VecError, ValueError):
    """Invalid argument values or misuse of the public API."""


class BallDomainError(UsageError):
    """A point lies outside the open Poincare ball for the given curvature."""


class DataFormatError(Event2VecError, ValueError):
    """A file or payload does not conform to the expected format."""


class NumericalError(Event2VecError, RuntimeError):
    """A numerical invariant failed at runtime (NaN/Inf in training, etc.)."""
