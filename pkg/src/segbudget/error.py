""" Exception Classes.

    Copyright (c) 2010 The PyroScope Project <pyroscope.project@gmail.com>
"""

from typing import Iterable, List, Optional


EX_OK = 0  # successful termination
EX__BASE = 64  # base value for error messages
EX_USAGE = 64  # command line usage error
EX_DATAERR = 65  # data format error
EX_NOINPUT = 66  # cannot open input
EX_UNAVAILABLE = 69  # service unavailable
EX_SOFTWARE = 70  # internal software error
EX_CANTCREAT = 73  # can't create (user) output file
EX_IOERR = 74  # input/output error
EX_TEMPFAIL = 75  # temp failure; user is invited to retry
EX_CONFIG = 78  # configuration error
EX__MAX = 78  # maximum listed value


class LoggableError(Exception):
    """An exception that is intended to be logged instead of passing it to the
    runtime environment which will likely produce a full stacktrace.
    """


class UserError(LoggableError):
    """Yes, it was your fault!"""


class ConfigurationError(LoggableError):
    """Generic config error."""


class ValidationError(LoggableError, ValueError):
    """A value is outside of its documented domain."""


class ShapeError(ValidationError):
    """Two masks that have to be compared differ in size."""


class ParseError(LoggableError):
    """Text could not be parsed; the raw input is kept for auditing."""

    def __init__(self, msg: str, raw: str = ""):
        super().__init__(msg)
        self.raw = raw


class JudgeError(LoggableError):
    """The judge service failed to deliver a usable answer."""

    def __init__(self, msg: str, sample_id: Optional[str] = None):
        if sample_id is not None:
            msg = f"{msg} [sample {sample_id}]"
        super().__init__(msg)
        self.sample_id = sample_id


class DataError(LoggableError):
    """Batch input contained problems, listed item by item."""

    def __init__(self, msg: str, problems: Iterable[str] = ()):
        self.problems: List[str] = list(problems)
        if self.problems:
            msg = msg + "\n  " + "\n  ".join(self.problems)
        super().__init__(msg)
