"""Exact optimization oracles over enumerable bundle spaces.

Everything a MILP solver would do in a production auction is done here by
exact enumeration at desk scale: utility-maximizing bundles, indirect
utility/revenue, winner determination over elicited candidate sets, the
true-welfare optimum, and a brute-force clearing-price search.

Determinism contract: every tie is broken toward the lexicographically
smallest bundle under the mixed-radix rank (and, for allocations, the
lexicographically smallest tuple of ranks in bidder order).  All routes to
the same quantity perform bitwise-identical float operations, so the pruned
search, the vectorized scan and the naive loops agree exactly.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from . import domain
from .domain import (
    Allocation,
    Bundle,
    Capacities,
    DemandObservation,
    Price,
    bundle_space,
    inner_product,
    price_column,
)
from .errors import DimensionError, DomainError, ResourceLimitError

#: slack keeping branch-and-bound pruning safe against last-ulp rounding
PRUNE_SLACK = 1e-9

#: utilities within this of the maximum count as tied (exhaustive tie sets)
TIE_EPS = 1e-9


class Valuation(Protocol):
    """What the oracles need from a bidder model: true model or trained net."""

    capacities: Capacities

    def value(self, bundle) -> float: ...

    def value_table(self, cap: int = ...) -> np.ndarray: ...


ReportSet = list[list[DemandObservation]]


def check_reports(reports: ReportSet, m: int) -> None:
    for i, obs_list in enumerate(reports):
        last_round = -1
        for obs in obs_list:
            if len(obs.bundle) != m:
                raise DimensionError(f"bidder {i}: observation dim {len(obs.bundle)} != {m}")
            if obs.round <= last_round:
                raise DomainError(f"bidder {i}: rounds must strictly increase")
            last_round = obs.round


# --- utility maximization ---------------------------------------------------

def demand_and_utility(val: Valuation, price: Sequence[float]) -> tuple[Bundle, float]:
    """Utility-maximizing bundle and its utility, from a single solve.

    Vectorized scan over the full (tabulated) bundle space; the first index
    achieving the maximum wins, which is the smallest mixed-radix rank.
    """
    caps = val.capacities
    p = domain.check_price(price, len(caps))
    bundles = bundle_space(caps)
    utilities = val.value_table() - price_column(bundles, p)
    idx = int(np.argmax(utilities))
    return tuple(int(v) for v in bundles[idx]), float(utilities[idx])


def argmax_utility(val: Valuation, price: Sequence[float]) -> Bundle:
    return demand_and_utility(val, price)[0]


def indirect_utility(val: Valuation, price: Sequence[float]) -> float:
    """Best achievable utility at the given prices (>= 0: the empty bundle)."""
    return demand_and_utility(val, price)[1]


def argmax_utility_pruned(val: Valuation, price: Sequence[float]) -> Bundle:
    """Depth-first branch and bound; agrees exactly with the vectorized scan.

    Items are fixed one at a time in ascending copy count.  A node's bound is
    the value of its full-capacity completion minus the price already
    committed; monotonicity makes it valid, and since the stored table is
    itself float-monotone the bound dominates every leaf utility exactly.
    """
    caps = val.capacities
    p = domain.check_price(price, len(caps))
    m = len(caps)
    table = val.value_table()
    radix = _radix_strides(caps)
    full_tail = [0] * (m + 1)  # rank contribution of a full-capacity suffix
    for j in range(m - 1, -1, -1):
        full_tail[j] = full_tail[j + 1] + caps[j] * radix[j]

    best_u = -np.inf
    best_rank = -1

    def visit(j: int, rank: int, paid: float) -> None:
        nonlocal best_u, best_rank
        if j == m:
            u = table[rank] - paid
            if u > best_u:
                best_u = u
                best_rank = rank
            return
        for x in range(caps[j] + 1):
            paid_x = paid + p[j] * x
            rank_x = rank + x * radix[j]
            bound = table[rank_x + full_tail[j + 1]] - paid_x
            if bound <= best_u - PRUNE_SLACK:
                continue
            visit(j + 1, rank_x, paid_x)

    visit(0, 0, 0.0)
    return domain.bundle_of_rank(best_rank, caps)


def argmax_utility_naive(val: Valuation, price: Sequence[float]) -> Bundle:
    """Plain per-bundle loop; the independent oracle for the fast paths."""
    caps = val.capacities
    p = domain.check_price(price, len(caps))
    table = val.value_table()
    best_u = -np.inf
    best = None
    for rank, x in enumerate(domain.iter_bundles(caps)):
        u = table[rank] - inner_product(p, x)
        if u > best_u:
            best_u = u
            best = x
    return best


def tie_set(val: Valuation, price: Sequence[float], eps: float = TIE_EPS) -> list[Bundle]:
    """All bundles whose utility is within eps of the maximum, by rank."""
    caps = val.capacities
    p = domain.check_price(price, len(caps))
    bundles = bundle_space(caps)
    utilities = val.value_table() - price_column(bundles, p)
    top = float(np.max(utilities))
    ranks = np.nonzero(utilities >= top - eps)[0]
    return [tuple(int(v) for v in bundles[r]) for r in ranks]


def demands_at(vals: Sequence[Valuation], price: Sequence[float]) -> tuple[Bundle, ...]:
    """Deterministic demand tuple of all bidders at one price vector."""
    return tuple(argmax_utility(v, price) for v in vals)


def indirect_revenue(price: Sequence[float], capacities: Sequence[int]) -> float:
    """<c, p>: selling every copy is revenue-optimal under linear prices."""
    caps = domain.check_capacities(capacities)
    p = domain.check_price(price, len(caps))
    return inner_product(p, caps)


def _radix_strides(capacities: Capacities) -> tuple[int, ...]:
    strides = []
    s = 1
    for c in reversed(capacities):
        strides.append(s)
        s *= c + 1
    return tuple(reversed(strides))


# --- winner determination ----------------------------------------------------

CandidateSet = dict[Bundle, float]


def candidates_from_reports(reports: ReportSet, m: int) -> list[CandidateSet]:
    """Per-bidder candidate bundles with inferred values.

    A bundle observed at several prices is worth its highest observed price;
    the empty bundle at value 0 is always available (a bidder may win
    nothing even if she never demanded nothing).
    """
    check_reports(reports, m)
    out = []
    for obs_list in reports:
        cands: CandidateSet = {domain.empty_bundle(m): 0.0}
        for obs in obs_list:
            inferred = obs.inferred_value()
            prev = cands.get(obs.bundle)
            if prev is None or inferred > prev:
                cands[obs.bundle] = inferred
        out.append(cands)
    return out


def merge_candidates(cands: CandidateSet, extra: dict[Bundle, float]) -> CandidateSet:
    """Merge extra bundle values into a candidate set, keeping the maximum."""
    merged = dict(cands)
    for bundle, value in extra.items():
        prev = merged.get(bundle)
        if prev is None or value > prev:
            merged[bundle] = value
    return merged


def select_allocation(
    candidate_sets: Sequence[CandidateSet], capacities: Sequence[int]
) -> tuple[Allocation, float]:
    """Exact welfare-maximizing feasible pick of one candidate per bidder.

    Depth-first search over bidders with memoization on (bidder, remaining
    capacity); totals accumulate from the last bidder toward the first so a
    memoized suffix value is reused bitwise.  Among optimal selections the
    lexicographically smallest tuple of bundle ranks is returned.
    """
    caps = domain.check_capacities(capacities)
    m = len(caps)
    per_bidder = []
    for cands in candidate_sets:
        items = [(domain.rank_of(b, caps), domain.check_bundle(b, caps), float(v))
                 for b, v in cands.items()]
        if not any(all(x == 0 for x in b) for _, b, _ in items):
            items.append((0, domain.empty_bundle(m), 0.0))
        items.sort(key=lambda it: it[0])
        per_bidder.append(items)
    n = len(per_bidder)
    memo: dict[tuple[int, Capacities], float] = {}

    def best_from(i: int, remaining: Capacities) -> float:
        if i == n:
            return 0.0
        key = (i, remaining)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best = -np.inf
        for _, bundle, value in per_bidder[i]:
            if all(x <= r for x, r in zip(bundle, remaining)):
                rest = tuple(r - x for r, x in zip(remaining, bundle))
                total = value + best_from(i + 1, rest)
                if total > best:
                    best = total
        memo[key] = best
        return best

    remaining = caps
    chosen: list[Bundle] = []
    total = best_from(0, caps)
    for i in range(n):
        target = best_from(i, remaining)
        for _, bundle, value in per_bidder[i]:
            if all(x <= r for x, r in zip(bundle, remaining)):
                rest = tuple(r - x for r, x in zip(remaining, bundle))
                if value + best_from(i + 1, rest) == target:
                    chosen.append(bundle)
                    remaining = rest
                    break
    return tuple(chosen), total


def select_allocation_naive(
    candidate_sets: Sequence[CandidateSet], capacities: Sequence[int]
) -> tuple[Allocation, float]:
    """Independent oracle: full product enumeration of candidate tuples."""
    import itertools

    caps = domain.check_capacities(capacities)
    m = len(caps)
    per_bidder = []
    for cands in candidate_sets:
        items = [(domain.rank_of(b, caps), tuple(b), float(v)) for b, v in cands.items()]
        if not any(all(x == 0 for x in b) for _, b, _ in items):
            items.append((0, domain.empty_bundle(m), 0.0))
        items.sort(key=lambda it: it[0])
        per_bidder.append(items)
    best_total = -np.inf
    best_alloc = None
    for combo in itertools.product(*per_bidder):
        if not domain.is_feasible([b for _, b, _ in combo], caps):
            continue
        total = 0.0
        for _, _, v in reversed(combo):  # suffix-first, matching the memo search
            total = v + total
        if total > best_total:
            best_total = total
            best_alloc = tuple(b for _, b, _ in combo)
    return best_alloc, best_total


def wdp_reports(reports: ReportSet, capacities: Sequence[int]) -> Allocation:
    """Inferred-welfare-optimal feasible allocation from demand query data."""
    caps = domain.check_capacities(capacities)
    cands = candidates_from_reports(reports, len(caps))
    allocation, _ = select_allocation(cands, caps)
    return allocation


def wdp_true(models: Sequence[Valuation], capacities: Sequence[int],
             cap: int = domain.DEFAULT_SPACE_CAP) -> tuple[Allocation, float]:
    """Exact social-welfare-maximizing allocation under the true models."""
    caps = domain.check_capacities(capacities)
    if domain.space_size(caps) > cap:
        raise ResourceLimitError(
            f"true welfare optimum over {domain.space_size(caps)} bundles exceeds cap {cap}"
        )
    bundles = bundle_space(caps)
    cands = []
    for model in models:
        table = model.value_table()
        cands.append({tuple(int(v) for v in bundles[r]): float(table[r])
                      for r in range(len(bundles))})
    return select_allocation(cands, caps)


# --- clearing-price search -----------------------------------------------------

def uniform_price_grid(m: int, lo: float, hi: float, step: float) -> list[list[float]]:
    """The same 1-D price grid for every item."""
    if step <= 0 or hi < lo:
        raise DomainError(f"bad grid: lo={lo}, hi={hi}, step={step}")
    count = int(round((hi - lo) / step)) + 1
    axis = [lo + k * step for k in range(count)]
    return [list(axis) for _ in range(m)]


def brute_force_clearing_search(
    models: Sequence[Valuation],
    capacities: Sequence[int],
    grid: Sequence[Sequence[float]],
    tie_eps: float = TIE_EPS,
    max_grid_points: int = 200_000,
) -> Price | None:
    """First grid price admitting an exactly market-clearing demand tuple.

    At each grid point the per-bidder tie sets are enumerated exhaustively
    and a tuple summing exactly to the capacities is searched; linear prices
    clear only by selling every copy.  Returns None when no grid point
    clears.
    """
    import itertools

    caps = domain.check_capacities(capacities)
    if len(grid) != len(caps):
        raise DimensionError(f"grid has {len(grid)} axes, need {len(caps)}")
    total = 1
    for axis in grid:
        total *= len(axis)
    if total > max_grid_points:
        raise ResourceLimitError(f"{total} grid points exceed cap {max_grid_points}")

    for point in itertools.product(*grid):
        price = domain.check_price(point, len(caps))
        ties = [tie_set(model, price, eps=tie_eps) for model in models]
        if _clearing_tuple_exists(ties, caps):
            return price
    return None


def _clearing_tuple_exists(tie_sets: list[list[Bundle]], caps: Capacities) -> bool:
    n = len(tie_sets)
    m = len(caps)
    # largest per-item demand still reachable from each suffix of bidders
    suffix_max = [[0] * m for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m):
            suffix_max[i][j] = suffix_max[i + 1][j] + max(b[j] for b in tie_sets[i])

    def search(i: int, short: tuple[int, ...]) -> bool:
        if i == n:
            return all(s == 0 for s in short)
        if any(suffix_max[i][j] < short[j] for j in range(m)):
            return False
        for bundle in tie_sets[i]:
            if all(x <= s for x, s in zip(bundle, short)):
                if search(i + 1, tuple(s - x for s, x in zip(short, bundle))):
                    return True
        return False

    return search(0, caps)
