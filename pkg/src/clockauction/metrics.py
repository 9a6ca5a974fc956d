"""Outcome metrics: efficiency, clearing error, and fit quality."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import domain, oracles
from .errors import MetricError


def efficiency(allocation, models, capacities, optimum_welfare: float | None = None) -> float:
    """Achieved share of the best possible social welfare, in [0, 1].

    Pass optimum_welfare to reuse a cached true optimum; a zero optimum
    counts as fully efficient by convention.
    """
    caps = domain.check_capacities(capacities)
    if optimum_welfare is None:
        _, optimum_welfare = oracles.wdp_true(models, caps)
    achieved = domain.social_welfare(allocation, models)
    if optimum_welfare == 0.0:
        return 1.0
    return achieved / optimum_welfare


def clearing_error(demands: Sequence[Sequence[int]], capacities: Sequence[int]) -> int:
    """Sum over items of the squared gap between total demand and capacity."""
    caps = domain.check_capacities(capacities)
    total = domain.total_demand(demands, len(caps))
    return sum((t - c) ** 2 for t, c in zip(total, caps))


def r_squared(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise MetricError(f"need equal nonzero lengths, got {p.shape} and {t.shape}")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R^2 undefined: truth values are all equal")
    ss_res = float(np.sum((t - p) ** 2))
    return 1.0 - ss_res / ss_tot


def r_squared_shift_invariant(pred: Sequence[float], truth: Sequence[float]) -> float:
    """R^2 after removing each side's mean; blind to constant offsets.

    Demand-query data determines a value function only up to a constant
    shift, so trained predictors are scored with this variant.
    """
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise MetricError(f"need equal nonzero lengths, got {p.shape} and {t.shape}")
    tc = t - t.mean()
    pc = p - p.mean()
    ss_tot = float(np.sum(tc**2))
    if ss_tot == 0.0:
        raise MetricError("R^2_c undefined: truth values are all equal")
    return 1.0 - float(np.sum((tc - pc) ** 2)) / ss_tot
