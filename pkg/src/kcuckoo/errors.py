"""Exception hierarchy shared by every module."""


class CuckooError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(CuckooError, ValueError):
    """Invalid or out-of-domain parameters."""


class UnsupportedParameterError(ParameterError):
    """Parameters valid in general but not supported by the chosen algorithm."""


class InputError(CuckooError, ValueError):
    """Malformed input data, e.g. duplicate identifiers."""


class SizeError(CuckooError, ValueError):
    """Instance too large for an exhaustive procedure."""


class ConstructionFailure(CuckooError):
    """No allocation exists for the given items under the sampled key."""

    def __init__(self, result):
        super().__init__("cuckoo construction failed")
        self.result = result


class ScheduleFailure(CuckooError):
    """A batch query could not be scheduled (the underlying allocation failed)."""


class DecodeError(CuckooError):
    """Retrieved codewords do not cover the batch query."""


class GridError(ParameterError):
    """Invalid grid point; carries the offending row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"grid row {row}: {message}")
        self.row = row
