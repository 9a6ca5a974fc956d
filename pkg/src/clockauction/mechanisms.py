"""Full auction mechanisms: the classic clock auction and its ML-powered variant.

Both mechanisms elicit truthful demand responses round by round.  The classic
clock raises the price of every over-demanded item by a fixed percentage and
stops once nothing is over-demanded; the ML variant spends a configurable
number of rounds on that price rule to gather data, then trains one monotone
net per bidder on her demand responses and asks the price with the highest
predicted clearing potential.  Market clearing ends either auction
immediately with the demanded allocation; otherwise the supplementary
heuristics add value bids and an exact winner determination picks the final
allocation, priced by VCG or VCG-nearest.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import domain, oracles, payments as payments_mod, prices as prices_mod, training
from .domain import Allocation, Bundle, Capacities, DemandObservation, Price, total_demand
from .errors import DomainError
from .nets import Architecture, init as net_init
from .oracles import ReportSet
from .prices import NextPriceConfig
from .training import TrainConfig

RP_TOL = 1e-9


@dataclass(frozen=True)
class ValueBid:
    """A bundle-value bid submitted outside the clock rounds."""

    bundle: Bundle
    amount: float

    def __post_init__(self):
        if not np.isfinite(self.amount) or self.amount < 0:
            raise DomainError(f"bid amount must be finite and >= 0, got {self.amount}")


@dataclass(frozen=True)
class CcaConfig:
    reserve_prices: Price
    increment: float = 0.05
    q_max: int = 100
    stop_when_no_overdemand: bool = True

    def __post_init__(self):
        if self.increment <= 0:
            raise DomainError(f"increment must be > 0, got {self.increment}")
        if self.q_max < 1:
            raise DomainError(f"q_max must be >= 1, got {self.q_max}")


@dataclass(frozen=True)
class MlCcaConfig:
    q_init: int
    q_max: int
    reserve_prices: Price
    f_init_increment: float | None = None  # None: span q_max rounds of cca_increment
    cca_increment: float = 0.05
    train: TrainConfig = field(default_factory=TrainConfig)
    next_price: NextPriceConfig = field(default_factory=NextPriceConfig)
    architecture: Architecture = field(default_factory=lambda: Architecture((16,)))
    perfect_ml: bool = False      # query prices from the true models instead of nets
    anchor: str = "previous"      # "previous" round's price, or the literal "q_init"
    warm_start: bool = False
    heuristic: str = "clock"      # "clock" | "raised" | "profit_max"
    q_p_max: int = 100
    payment_rule: str = "vcg"     # "vcg" | "vcg_nearest"
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.q_init <= self.q_max):
            raise DomainError(f"need 1 <= q_init <= q_max, got {self.q_init}, {self.q_max}")
        if self.anchor not in ("previous", "q_init"):
            raise DomainError(f"anchor must be 'previous' or 'q_init', got {self.anchor!r}")
        if self.heuristic not in ("clock", "raised", "profit_max"):
            raise DomainError(f"unknown heuristic {self.heuristic!r}")
        if self.payment_rule not in ("vcg", "vcg_nearest"):
            raise DomainError(f"unknown payment rule {self.payment_rule!r}")

    def resolved_f_init_increment(self) -> float:
        if self.f_init_increment is not None:
            return self.f_init_increment
        # q_init rounds see q_init - 1 price updates; match the multiplicative
        # range q_max rounds of the reference increment would reach
        exponent = (self.q_max - 1) / max(self.q_init - 1, 1)
        return (1.0 + self.cca_increment) ** exponent - 1.0


@dataclass
class AuctionOutcome:
    mechanism: str
    capacities: Capacities
    allocation: Allocation
    payments: tuple[float, ...]
    reports: ReportSet
    price_history: list[Price]
    demand_history: list[tuple[Bundle, ...]]
    cleared: bool
    rounds: int


# --- clock phase -------------------------------------------------------------

def cca_price_update(price: Sequence[float], demand: Sequence[int],
                     capacities: Sequence[int], increment: float) -> Price:
    """Raise every over-demanded item's price by the fixed percentage."""
    caps = domain.check_capacities(capacities)
    p = domain.check_price(price, len(caps))
    return tuple(
        p_j * (1.0 + increment) if d_j > c_j else p_j
        for p_j, d_j, c_j in zip(p, demand, caps)
    )


def cca_clock_phase(
    models: Sequence[oracles.Valuation], cfg: CcaConfig
) -> tuple[ReportSet, list[Price], list[tuple[Bundle, ...]], int | None]:
    """Run truthful demand rounds under the percentage price rule.

    Returns the reports, the price and demand history, and the first round
    index (0-based) at which demand cleared exactly, if any.  Stops early at
    clearing, and optionally once no item is over-demanded (prices would
    never move again).
    """
    caps = models[0].capacities
    p = domain.check_price(cfg.reserve_prices, len(caps))
    reports: ReportSet = [[] for _ in models]
    price_history: list[Price] = []
    demand_history: list[tuple[Bundle, ...]] = []
    cleared_round = None
    for r in range(cfg.q_max):
        demands = oracles.demands_at(models, p)
        price_history.append(p)
        demand_history.append(demands)
        for i, bundle in enumerate(demands):
            reports[i].append(DemandObservation(bundle, p, r))
        d = total_demand(demands, len(caps))
        if d == caps:
            cleared_round = r
            break
        if not any(d_j > c_j for d_j, c_j in zip(d, caps)):
            if cfg.stop_when_no_overdemand:
                break
            # prices are frozen from here on; keep querying only if asked not to stop
        p = cca_price_update(p, d, caps, cfg.increment)
    return reports, price_history, demand_history, cleared_round


# --- supplementary-round heuristics -------------------------------------------

def raised_clock_bids(
    reports: ReportSet, models: Sequence[oracles.Valuation]
) -> list[list[ValueBid]]:
    """True-value bids on every distinct nonempty bundle a bidder demanded."""
    out = []
    for obs_list, model in zip(reports, models):
        seen: dict[Bundle, None] = {}
        for obs in obs_list:
            if any(x > 0 for x in obs.bundle):
                seen.setdefault(obs.bundle, None)
        out.append([ValueBid(b, model.value(b)) for b in seen])
    return out


def profit_max_bids(
    model: oracles.Valuation, final_price: Sequence[float], q_p_max: int
) -> list[ValueBid]:
    """True-value bids on the bidder's top-utility bundles at the final prices."""
    if q_p_max < 0:
        raise DomainError(f"q_p_max must be >= 0, got {q_p_max}")
    caps = model.capacities
    p = domain.check_price(final_price, len(caps))
    bundles = domain.bundle_space(caps)
    table = model.value_table()
    utilities = table - domain.price_column(bundles, p)
    order = np.lexsort((np.arange(len(bundles)), -utilities))
    picked = order[:q_p_max]
    return [
        ValueBid(tuple(int(v) for v in bundles[r]), float(table[r])) for r in picked
    ]


def bids_to_candidates(bids: Sequence[ValueBid]) -> dict[Bundle, float]:
    out: dict[Bundle, float] = {}
    for bid in bids:
        prev = out.get(bid.bundle)
        if prev is None or bid.amount > prev:
            out[bid.bundle] = bid.amount
    return out


def wdp_with_bids(
    reports: ReportSet,
    extra_bids: Sequence[Sequence[ValueBid]],
    capacities: Sequence[int],
) -> tuple[Allocation, list[oracles.CandidateSet], float]:
    """Winner determination over inferred clock bids plus submitted value bids.

    Per bidder, a bundle's candidate value is the maximum of its inferred
    clock value and any bid amount on it; the empty bundle stays available.
    """
    caps = domain.check_capacities(capacities)
    candidates = oracles.candidates_from_reports(reports, len(caps))
    if extra_bids:
        if len(extra_bids) != len(reports):
            raise DomainError("need one bid list per bidder")
        candidates = [
            oracles.merge_candidates(c, bids_to_candidates(b))
            for c, b in zip(candidates, extra_bids)
        ]
    allocation, welfare = oracles.select_allocation(candidates, caps)
    return allocation, candidates, welfare


def revealed_preference_ok(
    bid: ValueBid, against: DemandObservation, inferred_final_bid: float
) -> bool:
    """Activity check: a bid may not contradict a past demand choice.

    Demanding x^r at p^r revealed that x^r beat bid.bundle by the price
    difference; a bid above `inferred_final_bid + <p^r, bundle - x^r>`
    would claim otherwise.
    """
    if len(bid.bundle) != len(against.bundle):
        raise DomainError("bid and observation dimensions differ")
    delta = domain.inner_product(
        against.price, tuple(b - x for b, x in zip(bid.bundle, against.bundle))
    )
    return bid.amount <= inferred_final_bid + delta + RP_TOL


# --- full mechanisms ------------------------------------------------------------

def _payments_for(
    candidates: list[oracles.CandidateSet],
    capacities: Capacities,
    rule: str,
) -> tuple[Allocation, tuple[float, ...]]:
    """Payments per the configured rule, on the WDP optimum of the candidates."""
    wdp_alloc, _ = oracles.select_allocation(candidates, capacities)
    if rule == "vcg_nearest":
        pays = payments_mod.vcg_nearest_payments(candidates, wdp_alloc, capacities)
    else:
        pays = payments_mod.vcg_payments(candidates, wdp_alloc, capacities)
    return wdp_alloc, pays


def _supplementary_bids(models, reports, heuristic, final_price, q_p_max):
    if heuristic == "clock":
        return [[] for _ in models]
    raised = raised_clock_bids(reports, models)
    if heuristic == "raised":
        return raised
    profit = [
        list(r) + profit_max_bids(m, final_price, q_p_max)
        for r, m in zip(raised, models)
    ]
    return profit


def run_cca(models: Sequence[oracles.Valuation], cfg: CcaConfig,
            heuristic: str = "clock", q_p_max: int = 100,
            payment_rule: str = "vcg") -> AuctionOutcome:
    """Classic clock auction plus the configured supplementary heuristic."""
    caps = models[0].capacities
    reports, price_history, demand_history, cleared_round = cca_clock_phase(models, cfg)
    if cleared_round is not None:
        allocation = demand_history[cleared_round]
        candidates = oracles.candidates_from_reports(reports, len(caps))
        _, pays = _payments_for(candidates, caps, payment_rule)
        return AuctionOutcome(
            "cca", caps, allocation, pays, reports, price_history,
            demand_history, True, len(price_history),
        )
    bids = _supplementary_bids(models, reports, heuristic, price_history[-1], q_p_max)
    allocation, candidates, _ = wdp_with_bids(reports, bids, caps)
    _, pays = _payments_for(candidates, caps, payment_rule)
    return AuctionOutcome(
        "cca", caps, allocation, pays, reports, price_history,
        demand_history, False, len(price_history),
    )


def _child_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def run_ml_cca(models: Sequence[oracles.Valuation], cfg: MlCcaConfig) -> AuctionOutcome:
    """ML-powered clock auction.

    Phase 1 plays q_init rounds of the percentage price rule with an
    increment widened to cover the usual price range in fewer rounds.
    Each remaining round trains a fresh monotone net per bidder on her full
    report set (or, in perfect-ml mode, uses the true models directly),
    generates the next demand query by the clearing-potential search, and
    queries truthful demand.  Exact clearing returns the demanded allocation
    immediately; otherwise the configured heuristic and winner determination
    settle the outcome.
    """
    caps = models[0].capacities
    n = len(models)
    reports: ReportSet = [[] for _ in models]
    price_history: list[Price] = []
    demand_history: list[tuple[Bundle, ...]] = []

    def record(p, r):
        demands = oracles.demands_at(models, p)
        price_history.append(p)
        demand_history.append(demands)
        for i, bundle in enumerate(demands):
            reports[i].append(DemandObservation(bundle, p, r))
        return total_demand(demands, len(caps))

    # phase 1: price-rule rounds to seed the reports
    f_inc = cfg.resolved_f_init_increment()
    p = domain.check_price(cfg.reserve_prices, len(caps))
    cleared_at = None
    for r in range(cfg.q_init):
        d = record(p, r)
        if d == caps:
            cleared_at = r
            break
        p = cca_price_update(p, d, caps, f_inc)

    # phase 2: ML-powered rounds
    nets = [None] * n
    if cleared_at is None:
        for r in range(cfg.q_init, cfg.q_max):
            if cfg.perfect_ml:
                vals: Sequence[oracles.Valuation] = models
            else:
                for i in range(n):
                    if nets[i] is None or not cfg.warm_start:
                        nets[i] = net_init(
                            cfg.architecture, caps, _child_seed(cfg.seed, r, i, 1)
                        )
                    train_cfg = dataclasses.replace(
                        cfg.train, seed=_child_seed(cfg.seed, r, i, 2)
                    )
                    nets[i], _ = training.train_on_dqs(nets[i], reports[i], train_cfg)
                vals = nets
            if cfg.anchor == "q_init":
                anchor = price_history[cfg.q_init - 1]
            else:
                anchor = price_history[-1]
            np_cfg = dataclasses.replace(
                cfg.next_price, seed=_child_seed(cfg.seed, r, 3)
            )
            p, _ = prices_mod.next_price(vals, anchor, np_cfg)
            d = record(p, r)
            if d == caps:
                cleared_at = r
                break

    if cleared_at is not None:
        allocation = demand_history[-1]
        candidates = oracles.candidates_from_reports(reports, len(caps))
        _, pays = _payments_for(candidates, caps, cfg.payment_rule)
        return AuctionOutcome(
            "ml-clock", caps, allocation, pays, reports, price_history,
            demand_history, True, len(price_history),
        )

    bids = _supplementary_bids(models, reports, cfg.heuristic, price_history[-1], cfg.q_p_max)
    allocation, candidates, _ = wdp_with_bids(reports, bids, caps)
    _, pays = _payments_for(candidates, caps, cfg.payment_rule)
    return AuctionOutcome(
        "ml-clock", caps, allocation, pays, reports, price_history,
        demand_history, False, len(price_history),
    )


def default_reserve(models: Sequence[oracles.Valuation], rho: float = 0.1) -> Price:
    """rho times the mean (over bidders) best marginal value of one extra copy."""
    caps = models[0].capacities
    bundles = domain.bundle_space(caps)
    m = len(caps)
    means = np.zeros(m)
    for model in models:
        table = model.value_table()
        for j in range(m):
            extendable = bundles[:, j] < caps[j]
            stride = oracles._radix_strides(caps)[j]
            idx = np.nonzero(extendable)[0]
            means[j] += float(np.max(table[idx + stride] - table[idx]))
    means /= len(models)
    return tuple(float(rho * v) for v in means)
