"""Exception hierarchy shared by every oddl module."""


class ODDLError(Exception):
    """Base class for all errors raised by oddl."""


class InvalidInputError(ODDLError, ValueError):
    """Array shapes or values do not satisfy an operation's preconditions."""


class ConfigError(ODDLError, ValueError):
    """A training or run configuration is invalid."""


class DataError(ODDLError, ValueError):
    """Dataset contents are inconsistent (e.g. labels out of range)."""


class FormatError(ODDLError, ValueError):
    """A file does not parse under its declared format.

    ``offset`` is the byte offset (or 1-based line number for text formats)
    where parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if isinstance(offset, int):
            message = f"{message} (at byte offset {offset})"
        elif offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)
        self.offset = offset


class ChecksumError(FormatError):
    pass


class VersionError(FormatError):
    pass
