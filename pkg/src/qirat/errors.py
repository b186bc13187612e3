"""Exception hierarchy shared across the package."""


class QiratError(Exception):
    """Base class for all package errors."""


class FormatError(QiratError):
    """A persisted index file violates the binary format."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class HeaderFieldError(FormatError):
    """Header declares an impossible dim/count combination."""
