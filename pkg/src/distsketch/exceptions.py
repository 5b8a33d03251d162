"""Exception types. All derive from ``ValueError`` so callers can catch broadly."""


class DomainError(ValueError):
    """An input lies outside the domain of a valuation or distribution."""


class SketchError(ValueError):
    """The discretization preconditions do not hold for an item."""


class CapacityError(ValueError):
    """An exact computation would exceed its configured size cap."""
