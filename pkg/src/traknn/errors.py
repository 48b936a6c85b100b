"""Exception hierarchy shared by every traknn module."""


class TraknnError(Exception):
    """Base class for all library errors."""


class FormatError(TraknnError):
    """A data file could not be decoded."""


class MalformedHeaderError(FormatError):
    pass


class LengthMismatchError(FormatError):
    pass


class NonFiniteValueError(FormatError):
    """A NaN or infinite element was found in input data."""


class UnsupportedDtypeError(FormatError):
    pass


class ConfigError(TraknnError, ValueError):
    """A run configuration violates its own invariants."""


class InfeasibleConfigError(ConfigError):
    """Too few admissible neighbor candidates for the requested k.

    Attributes
    ----------
    available : int
        Worst-case number of admissible candidates per trajectory.
    required : int
        The neighbor count that was requested.
    """

    def __init__(self, available, required):
        self.available = available
        self.required = required
        super().__init__(
            f"infeasible configuration: {available} admissible candidates "
            f"per trajectory, {required} required"
        )


class MemoryBudgetError(TraknnError, MemoryError):
    """Allocation refused or failed; carries the attempted byte count."""

    def __init__(self, nbytes, budget=None):
        self.nbytes = int(nbytes)
        self.budget = budget
        msg = f"cannot allocate {self.nbytes} bytes"
        if budget is not None:
            msg += f" (budget {int(budget)} bytes)"
        super().__init__(msg)
