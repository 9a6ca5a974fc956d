"""Core value types and arithmetic for multiset auction domains.

Bundles, capacities and prices are plain tuples so they hash, compare and
serialize without ceremony; everything heavier (tables, nets) lives in the
modules that need numpy.

Conventions used throughout the package:

* item ``j`` has ``capacities[j]`` identical copies; a bundle holds
  ``bundle[j]`` of them, ``0 <= bundle[j] <= capacities[j]``,
* bidder indices are 0-based everywhere, including serialized artifacts,
* bundles are ordered by their mixed-radix rank
  ``rank(x) = sum_j x_j * prod_{k>j} (c_k + 1)`` (item 0 most significant),
  which is the tie-breaking order for every deterministic choice,
* inner products accumulate over items in ascending ``j`` so that scalar
  and vectorized code paths produce bitwise-identical floats.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, ResourceLimitError

Bundle = tuple[int, ...]
Capacities = tuple[int, ...]
Price = tuple[float, ...]
Allocation = tuple[Bundle, ...]

#: money comparisons use this absolute tolerance; demand counts stay exact ints
MONEY_EPS = 1e-9

#: refuse to enumerate bundle spaces larger than this by default
DEFAULT_SPACE_CAP = 10**6


def check_capacities(capacities: Sequence[int]) -> Capacities:
    caps = tuple(int(c) for c in capacities)
    if len(caps) < 1:
        raise DomainError("need at least one item")
    if any(c < 1 for c in caps):
        raise DomainError(f"every capacity must be >= 1, got {caps}")
    return caps


def check_bundle(bundle: Sequence[int], capacities: Sequence[int]) -> Bundle:
    x = tuple(int(v) for v in bundle)
    if len(x) != len(capacities):
        raise DimensionError(f"bundle has {len(x)} items, capacities {len(capacities)}")
    for v, c in zip(x, capacities):
        if v < 0 or v > c:
            raise DomainError(f"bundle {x} outside capacities {tuple(capacities)}")
    return x


def check_price(price: Sequence[float], m: int) -> Price:
    p = tuple(float(v) for v in price)
    if len(p) != m:
        raise DimensionError(f"price has {len(p)} items, expected {m}")
    if any(not np.isfinite(v) or v < 0 for v in p):
        raise DomainError(f"prices must be finite and >= 0, got {p}")
    return p


def empty_bundle(m: int) -> Bundle:
    return (0,) * m


def space_size(capacities: Sequence[int]) -> int:
    size = 1
    for c in capacities:
        size *= c + 1
    return size


def rank_of(bundle: Sequence[int], capacities: Sequence[int]) -> int:
    """Mixed-radix rank of a bundle; item 0 is the most significant digit."""
    r = 0
    for x, c in zip(bundle, capacities):
        r = r * (c + 1) + x
    return r


def bundle_of_rank(rank: int, capacities: Sequence[int]) -> Bundle:
    digits = []
    for c in reversed(capacities):
        digits.append(rank % (c + 1))
        rank //= c + 1
    return tuple(reversed(digits))


def iter_bundles(capacities: Sequence[int]) -> Iterable[Bundle]:
    """All bundles in ascending rank order."""
    return itertools.product(*(range(c + 1) for c in capacities))


@lru_cache(maxsize=64)
def bundle_space(capacities: Capacities, cap: int = DEFAULT_SPACE_CAP) -> np.ndarray:
    """Dense ``(|X|, m)`` int matrix of all bundles in rank order."""
    n = space_size(capacities)
    if n > cap:
        raise ResourceLimitError(f"bundle space of size {n} exceeds cap {cap}")
    out = np.empty((n, len(capacities)), dtype=np.int64)
    for i, x in enumerate(iter_bundles(capacities)):
        out[i] = x
    out.setflags(write=False)
    return out


def inner_product(price: Sequence[float], bundle: Sequence[int]) -> float:
    """<p, x>, accumulated in ascending item order."""
    if len(price) != len(bundle):
        raise DimensionError(f"price dim {len(price)} != bundle dim {len(bundle)}")
    total = 0.0
    for p, x in zip(price, bundle):
        total += p * x
    return total


def price_column(bundles: np.ndarray, price: Sequence[float]) -> np.ndarray:
    """<p, x> for every row of a bundle matrix.

    Accumulates item by item in the same order as :func:`inner_product`, so
    each entry is bitwise identical to the scalar computation.
    """
    if bundles.shape[1] != len(price):
        raise DimensionError(f"bundle matrix dim {bundles.shape[1]} != price dim {len(price)}")
    total = np.zeros(len(bundles))
    for j, p in enumerate(price):
        total += p * bundles[:, j]
    return total


def quasilinear_utility(value: float, price: Sequence[float], bundle: Sequence[int]) -> float:
    """value - <p, x>."""
    if not np.isfinite(value):
        raise DomainError(f"value must be finite, got {value}")
    return value - inner_product(price, bundle)


def is_feasible(allocation: Sequence[Sequence[int]], capacities: Sequence[int]) -> bool:
    """True iff total demand stays within every item's capacity."""
    m = len(capacities)
    total = [0] * m
    for bundle in allocation:
        if len(bundle) != m:
            raise DimensionError(f"bundle dim {len(bundle)} != capacities dim {m}")
        for j, x in enumerate(bundle):
            total[j] += x
    return all(total[j] <= capacities[j] for j in range(m))


def total_demand(bundles: Sequence[Sequence[int]], m: int) -> tuple[int, ...]:
    total = [0] * m
    for bundle in bundles:
        for j, x in enumerate(bundle):
            total[j] += x
    return tuple(total)


def social_welfare(allocation: Sequence[Sequence[int]], models) -> float:
    """Sum of the bidders' true values for their assigned bundles."""
    if len(allocation) != len(models):
        raise DimensionError(f"{len(allocation)} bundles for {len(models)} bidders")
    return sum(model.value(tuple(bundle)) for model, bundle in zip(models, allocation))


@dataclass(frozen=True)
class DemandObservation:
    """One elicited demand-query response: the chosen bundle at given prices."""

    bundle: Bundle
    price: Price
    round: int

    def __post_init__(self):
        if len(self.bundle) != len(self.price):
            raise DimensionError(
                f"bundle dim {len(self.bundle)} != price dim {len(self.price)}"
            )
        if self.round < 0:
            raise DomainError("round must be >= 0")

    def inferred_value(self) -> float:
        """Price paid at the observation: a lower bound on the true value."""
        return inner_product(self.price, self.bundle)
