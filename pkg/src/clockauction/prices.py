"""Clearing objective, its subgradient, and the next-price search.

The clearing objective is the seller's indirect revenue plus every bidder's
indirect utility.  It is convex and piecewise linear in the prices, it is
minimized exactly at clearing prices whenever those exist, and capacity
minus total demand is always a subgradient.  The search descends it with a
price-proportional learning rate, punishing over-demand harder than
under-demand so that the returned prices induce a feasible predicted
allocation whenever one was encountered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import domain, oracles
from .domain import Allocation, Bundle, Capacities, Price, total_demand
from .errors import DomainError


@dataclass(frozen=True)
class NextPriceConfig:
    epochs: int = 300
    learning_rate: float = 0.01
    decay: float = 0.005
    mu: float = 2.0          # over-demand step multiplier; mu = nu = 0 disables the
    nu: float = 1.01         # feasibility bias entirely (pure subgradient descent)
    seed: int = 0
    jitter: tuple[float, float] = (0.75, 1.25)
    overdemand_factor: str = "mu"   # "mu" (operational rule) or "one_plus_mu"
    decay_per_item: bool = False    # decay the rate once per item instead of per epoch

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise DomainError(f"learning rate must be > 0, got {self.learning_rate}")
        if not (0.0 <= self.decay <= 1.0):
            raise DomainError(f"decay must be in [0, 1], got {self.decay}")
        if self.mu < 0 or self.nu < 0:
            raise DomainError("mu and nu must be >= 0")
        if self.overdemand_factor not in ("mu", "one_plus_mu"):
            raise DomainError(f"bad overdemand_factor {self.overdemand_factor!r}")
        lo, hi = self.jitter
        if not (0 <= lo <= hi):
            raise DomainError(f"bad jitter range {self.jitter}")

    @property
    def unconstrained(self) -> bool:
        return self.mu == 0.0 and self.nu == 0.0


@dataclass
class PriceStep:
    price: Price
    objective: float
    demand: tuple[int, ...]
    feasible: bool


@dataclass
class PriceTrace:
    steps: list[PriceStep] = field(default_factory=list)
    best_index: int = -1
    best_feasible_index: int = -1
    cleared: bool = False

    @property
    def ever_feasible(self) -> bool:
        return self.best_feasible_index >= 0


def clearing_objective(price: Sequence[float], vals: Sequence[oracles.Valuation],
                       capacities: Sequence[int]) -> float:
    """Seller's indirect revenue plus the bidders' indirect utilities."""
    caps = domain.check_capacities(capacities)
    w = oracles.indirect_revenue(price, caps)
    for val in vals:
        w += oracles.indirect_utility(val, price)
    return w


def subgradient_w(price: Sequence[float], vals: Sequence[oracles.Valuation],
                  capacities: Sequence[int]) -> tuple[float, ...]:
    """Capacity minus total demand: a subgradient, a.e. the gradient."""
    caps = domain.check_capacities(capacities)
    demands = oracles.demands_at(vals, price)
    d = total_demand(demands, len(caps))
    return tuple(float(c - x) for c, x in zip(caps, d))


def asym_update(price: Sequence[float], demand: Sequence[int], capacities: Sequence[int],
                learning_rate: float, mu: float,
                overdemand_factor: str = "mu") -> Price:
    """One price step, over-demand scaled harder than under-demand.

    Per item, the step is lr * p_j * (c_j - d_j) away from the gap, scaled by
    mu (or 1 + mu) when the item is over-demanded; prices floor at 0.
    """
    caps = domain.check_capacities(capacities)
    p = domain.check_price(price, len(caps))
    if len(demand) != len(caps):
        raise DomainError(f"demand dim {len(demand)} != {len(caps)}")
    over_scale = mu if overdemand_factor == "mu" else 1.0 + mu
    out = []
    for p_j, d_j, c_j in zip(p, demand, caps):
        gamma = learning_rate * p_j
        step = gamma * (c_j - d_j)
        if d_j > c_j:
            step = over_scale * step
        out.append(max(0.0, p_j - step))
    return tuple(out)


def _predicted_round(vals, price, caps):
    """One predicted-demand evaluation: W, total demand, feasibility."""
    w = oracles.indirect_revenue(price, caps)
    demands = []
    for val in vals:
        bundle, utility = oracles.demand_and_utility(val, price)
        demands.append(bundle)
        w += utility
    d = total_demand(demands, len(caps))
    feasible = all(x <= c for x, c in zip(d, caps))
    return w, d, feasible


def next_price(vals: Sequence[oracles.Valuation], anchor: Sequence[float],
               cfg: NextPriceConfig) -> tuple[Price, PriceTrace]:
    """Search for the demand query with the highest clearing potential.

    Starts from a seeded jitter of the anchor prices and iterates the
    asymmetric update, tracking the best objective seen overall and among
    iterates whose predicted demand was feasible.  Stops early on exact
    predicted clearing.  The over-demand multiplier grows by nu after every
    epoch while no feasible iterate has been seen, then freezes.  Returns
    the best feasible price, falling back to the best overall when no
    iterate was feasible; with mu = nu = 0 this is plain subgradient descent
    returning the best overall price.
    """
    if not vals:
        raise DomainError("need at least one bidder")
    caps = vals[0].capacities
    p = domain.check_price(anchor, len(caps))
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    lo, hi = cfg.jitter
    p = tuple(float(rng.uniform(lo * pj, hi * pj)) for pj in p)

    lam = cfg.learning_rate
    mu = cfg.mu
    best_w = np.inf
    best_feasible_w = np.inf
    trace = PriceTrace()

    for _ in range(cfg.epochs):
        w, d, feasible = _predicted_round(vals, p, caps)
        trace.steps.append(PriceStep(p, w, d, feasible))
        if w < best_w:
            best_w = w
            trace.best_index = len(trace.steps) - 1
        if feasible and w < best_feasible_w:
            best_feasible_w = w
            trace.best_feasible_index = len(trace.steps) - 1
        if d == caps:
            trace.cleared = True
            break
        if cfg.decay_per_item:
            # literal per-item decay: each item sees a slightly smaller rate
            out = []
            over_scale = mu if cfg.overdemand_factor == "mu" else 1.0 + mu
            for p_j, d_j, c_j in zip(p, d, caps):
                gamma = lam * p_j
                step = gamma * (c_j - d_j)
                if d_j > c_j:
                    step = over_scale * step
                out.append(max(0.0, p_j - step))
                lam *= 1.0 - cfg.decay
            p = tuple(out)
        else:
            p = asym_update(p, d, caps, lam, mu, cfg.overdemand_factor)
            lam *= 1.0 - cfg.decay
        if not trace.ever_feasible:
            mu *= cfg.nu

    if cfg.unconstrained or not trace.ever_feasible:
        chosen = trace.best_index
    else:
        chosen = trace.best_feasible_index
    return trace.steps[chosen].price, trace


def check_clearing(models: Sequence[oracles.Valuation], price: Sequence[float],
                   capacities: Sequence[int]) -> tuple[bool, Allocation]:
    """Whether truthful demand at these prices sells every copy exactly."""
    caps = domain.check_capacities(capacities)
    demands = oracles.demands_at(models, price)
    cleared = total_demand(demands, len(caps)) == caps
    return cleared, demands
