"""
Errors Module

Exception hierarchy shared by the simulator, the log store and the CLI.
"""

from typing import Iterable, Optional


class SafeFilterBenchError(Exception):
    """Base class for every error raised by safefilterbench."""


class ContractViolation(SafeFilterBenchError, ValueError):
    """A precondition on an operation's inputs does not hold."""


class SceneGenerationError(SafeFilterBenchError):
    """The crowding sampler could not place the requested obstacles."""


class LogParseError(SafeFilterBenchError):
    """An EpisodeLog does not have the array layout the metrics expect."""


class ConfigError(SafeFilterBenchError):
    """
    Invalid benchmark configuration.

    Attributes:
        reason: Message without the line prefix
        line: 1-based line number in the config file, when known
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.reason = message
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

    def __reduce__(self):
        return type(self), (self.reason, self.line)


class RunExistsError(SafeFilterBenchError):
    """A run directory already holds an archive and overwriting was not requested."""


class NpyFormatError(SafeFilterBenchError):
    """Base class for NPY decoding failures."""


class NotNpyError(NpyFormatError):
    """The input does not start with the NPY magic string."""


class UnsupportedDtypeError(NpyFormatError):
    """The header names a dtype outside the supported set."""

    def __init__(self, descr: str):
        self.descr = descr
        super().__init__(f"unsupported dtype {descr!r}")

    def __reduce__(self):
        return type(self), (self.descr,)


class HeaderSyntaxError(NpyFormatError):
    """The header dictionary literal is malformed."""

    def __init__(self, message: str, position: int):
        self.reason = message
        self.position = position
        super().__init__(f"{message} at byte {position}")

    def __reduce__(self):
        return type(self), (self.reason, self.position)


class ArchiveError(SafeFilterBenchError):
    """The NPZ container itself cannot be read."""


class ArchiveSchemaError(ArchiveError):
    """Required arrays are missing from an episode archive."""

    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(missing)
        super().__init__("archive is missing required arrays: " + ", ".join(self.missing))

    def __reduce__(self):
        return type(self), (self.missing,)


class ArchiveMemberError(ArchiveError):
    """An archive member failed to decode."""

    def __init__(self, member: str, cause: Exception):
        self.member = member
        self.cause = cause
        super().__init__(f"member {member!r}: {cause}")

    def __reduce__(self):
        return type(self), (self.member, self.cause)


class UnknownMemberWarning(UserWarning):
    """An archive carries an array this version does not know about."""
