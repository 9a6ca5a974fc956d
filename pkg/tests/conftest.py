"""Shared test helpers: independent brute-force oracles and table generators."""

import itertools

import numpy as np
import pytest

from clockauction import domain


def all_bundles(caps):
    return list(itertools.product(*(range(c + 1) for c in caps)))


def brute_argmax(value_fn, caps, price):
    """Independent utility argmax: plain loop, first strict maximum wins."""
    best_u = -float("inf")
    best = None
    for x in all_bundles(caps):
        u = value_fn(x) - sum(p * v for p, v in zip(price, x))
        if u > best_u:
            best_u = u
            best = x
    return best, best_u


def brute_max_revenue(caps, price, n_bidders):
    """Max of sum_i <p, a_i> over feasible allocations, by full enumeration."""
    best = -float("inf")
    per_bidder = all_bundles(caps)
    for combo in itertools.product(per_bidder, repeat=n_bidders):
        total = [0] * len(caps)
        for b in combo:
            for j, x in enumerate(b):
                total[j] += x
        if any(t > c for t, c in zip(total, caps)):
            continue
        revenue = sum(sum(p * v for p, v in zip(price, b)) for b in combo)
        best = max(best, revenue)
    return best


def random_monotone_table(rng, caps, scale=6.0, strictly_increasing=False):
    """Monotone normalized table: running max of raw draws along dominance."""
    size = domain.space_size(caps)
    if strictly_increasing:
        # cumulative positive increments (only sensible for one item)
        assert len(caps) == 1
        increments = rng.uniform(0.3, scale / max(1, caps[0]), size=caps[0])
        return np.concatenate([[0.0], np.cumsum(increments)])
    raw = rng.uniform(0.0, scale, size=size)
    raw[0] = 0.0
    table = raw.copy()
    strides = []
    s = 1
    for c in reversed(caps):
        strides.append(s)
        s *= c + 1
    strides = tuple(reversed(strides))
    for rank, x in enumerate(itertools.product(*(range(c + 1) for c in caps))):
        for j in range(len(caps)):
            if x[j] > 0:
                table[rank] = max(table[rank], table[rank - strides[j]])
    return table


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
