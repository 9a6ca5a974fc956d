"""Clock auctions for multiset combinatorial domains, solver-free at desk scale."""

__version__ = "0.1.0"

from .domain import (
    Allocation,
    Bundle,
    Capacities,
    DemandObservation,
    Price,
    inner_product,
    is_feasible,
    quasilinear_utility,
    social_welfare,
)
from .errors import (
    AuctionError,
    DimensionError,
    DomainError,
    MetricError,
    ResourceLimitError,
)

__all__ = [
    "__version__",
    "Allocation",
    "Bundle",
    "Capacities",
    "DemandObservation",
    "Price",
    "inner_product",
    "is_feasible",
    "quasilinear_utility",
    "social_welfare",
    "AuctionError",
    "DimensionError",
    "DomainError",
    "MetricError",
    "ResourceLimitError",
]
