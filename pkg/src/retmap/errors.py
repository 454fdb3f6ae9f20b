"""Exception types shared across the package."""


class RetmapError(Exception):
    """Base class for all retmap errors."""


class FormatError(RetmapError):
    """A dataset file is missing or cannot be parsed."""


class ValidationError(RetmapError):
    """Dataset contents violate an invariant (shapes, ordering, geometry)."""

    def __init__(self, message: str, issues: list[str] | None = None):
        super().__init__(message)
        self.issues = issues if issues is not None else [message]


class CohortSpecError(RetmapError):
    """A synthetic cohort specification is not realizable."""


class CapabilityError(RetmapError):
    """The requested attribute needs data the dataset does not carry."""


class GridEditError(RetmapError):
    """An illegal split or merge was requested."""


class InsufficientDataError(RetmapError):
    """Too few samples (or maps) to run the requested statistic."""


class DomainMismatchError(RetmapError):
    """Maps or models do not share the en-face domain they are required to."""


class SelectionError(RetmapError):
    """A measurement selection is empty or outside the map domain."""
