"""Exception types shared across the package."""


class AuctionError(Exception):
    """Base class for all clockauction errors."""


class DimensionError(AuctionError):
    """Vectors that must share the item dimension do not."""


class DomainError(AuctionError):
    """A value, bundle or parameter violates its domain contract."""


class ResourceLimitError(AuctionError):
    """An exact computation would exceed the configured enumeration cap."""


class MetricError(AuctionError):
    """A metric is undefined for the given inputs (e.g. constant truth)."""
