"""Exception types shared across the package.

The split matters for the command line tool: data problems (bad files,
inconsistent labels) and numerical problems (non-finite matrices) map to
different exit codes.
"""


class DataError(ValueError):
    """Invalid input data: malformed streams, inconsistent labels, bad features."""


class StreamFormatError(DataError):
    """A stream file failed to parse or validate; message carries path and line."""


class NumericalError(ValueError):
    """A numerical routine received input it cannot work with (e.g. NaN costs)."""
