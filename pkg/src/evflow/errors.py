"""Exception types shared across the package."""


class EvflowError(Exception):
    """Base class for every domain error raised by evflow."""


class FormatError(EvflowError):
    """A byte stream does not conform to one of the on-disk formats."""


class DataError(EvflowError):
    """Inputs are readable but violate an operation's contract."""
