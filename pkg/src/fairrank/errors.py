"""Exception types raised across the package."""


class FairrankError(Exception):
    """Base class for all fairrank errors."""


class InvalidLabel(FairrankError, ValueError):
    """A subgroup label could not be constructed."""


class MissingLabel(FairrankError, ValueError):
    """An operation needed an inferred label (or matrix row) that is absent."""


class EmptyPopulation(FairrankError, ValueError):
    """An operation received an empty candidate collection."""


class DuplicateId(FairrankError, ValueError):
    """Two candidates share an identifier."""


class ZeroBaseProportion(FairrankError, ValueError):
    """A group present in the ranking has zero mass in the base distribution."""


class InvalidRank(FairrankError, ValueError):
    """A rank argument was outside its valid range."""


class DegenerateRatio(FairrankError, ValueError):
    """A min/max group ratio is undefined because the maximum statistic is zero."""


class InsufficientCandidates(FairrankError, ValueError):
    """The candidate pool cannot satisfy the requested group floors."""

    def __init__(self, group, needed=None, available=None):
        self.group = group
        self.needed = needed
        self.available = available
        detail = f"group {group!s} cannot meet its quota"
        if needed is not None:
            detail += f" (needs {needed}, has {available})"
        super().__init__(detail)


class UnknownCandidate(FairrankError, KeyError):
    """A re-ranked list contains an id absent from the original ranking."""


class UnknownMatrix(FairrankError, KeyError):
    """No built-in confusion matrix is registered under the requested name."""


class InvalidMatrix(FairrankError, ValueError):
    """A confusion matrix violates row-stochasticity or label constraints."""
