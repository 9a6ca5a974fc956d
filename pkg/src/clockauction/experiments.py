"""Experiment orchestration: seeded auction runs, metrics files, worked examples.

A single experiment sweeps a seed list over one synthetic domain and a set of
mechanism configurations, producing per-run outcome documents, a flat
results.csv, per-round trace tables and an aggregate summary.  Runs are
deterministic per seed: worker parallelism never changes any output byte.
Wall-clock timings are kept out of results.csv for exactly that reason and
land in a separate timings.csv.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import domain, metrics, oracles, prices as prices_mod, values
from .domain import Capacities, DemandObservation, Price
from .errors import DomainError
from .mechanisms import (
    AuctionOutcome,
    CcaConfig,
    MlCcaConfig,
    default_reserve,
    raised_clock_bids,
    profit_max_bids,
    run_cca,
    run_ml_cca,
    wdp_with_bids,
)
from .nets import Architecture, MonotoneNet
from .prices import NextPriceConfig
from .training import TrainConfig
from .values import SynergyDomainSpec, ThresholdValuation, generate_synergy_model

SCHEMA_VERSION = 1

WORKERS_ENV = "CLOCKAUCTION_WORKERS"

RESULT_FIELDS = ["seed", "mechanism", "mode", "rounds", "cleared", "e_clock", "e_raise", "e_profit"]
TIMING_FIELDS = ["seed", "mechanism", "mode", "wallclock_ms"]


@dataclass(frozen=True)
class MechanismSpec:
    """One mechanism row of an experiment: which auction, with which knobs."""

    mechanism: str = "cca"            # "cca" | "ml-clock"
    mode: str = "default"             # free-form row label
    q_max: int = 30
    q_init: int = 10                  # ml-clock only
    increment: float = 0.05
    f_init_increment: float | None = None
    reserve_rho: float = 0.1
    perfect_ml: bool = False
    constrained: bool = True
    hidden_dims: tuple[int, ...] = (16,)
    linear_skip: bool = False
    train_epochs: int = 30
    train_lr: float = 0.01
    train_l2: float = 0.0
    np_epochs: int = 300
    np_lr: float = 0.01
    np_decay: float = 0.005
    mu: float = 2.0
    nu: float = 1.01
    heuristic: str = "clock"
    q_p_max: int = 100
    payment_rule: str = "vcg"

    def __post_init__(self):
        if self.mechanism not in ("cca", "ml-clock"):
            raise DomainError(f"unknown mechanism {self.mechanism!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    domain: SynergyDomainSpec
    seeds: tuple[int, ...]
    mechanisms: tuple[MechanismSpec, ...]
    trace_efficiency: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise DomainError("need at least one seed")
        if not self.mechanisms:
            raise DomainError("need at least one mechanism")


def expand_seeds(spec) -> tuple[int, ...]:
    """Seed lists may mix ints and inclusive 'a..b' range strings."""
    seeds: list[int] = []
    for entry in spec:
        if isinstance(entry, str) and ".." in entry:
            lo, hi = entry.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(entry))
    if not seeds:
        raise DomainError("empty seed specification")
    return tuple(seeds)


# --- config (de)serialization --------------------------------------------------

def mechanism_spec_from_dict(doc: dict) -> MechanismSpec:
    known = {f.name for f in dataclasses.fields(MechanismSpec)}
    unknown = set(doc) - known
    if unknown:
        raise DomainError(f"unknown mechanism config keys: {sorted(unknown)}")
    doc = dict(doc)
    if "hidden_dims" in doc:
        doc["hidden_dims"] = tuple(doc["hidden_dims"])
    return MechanismSpec(**doc)


def experiment_config_from_dict(doc: dict) -> ExperimentConfig:
    dom = doc["domain"]
    spec = SynergyDomainSpec(
        capacities=tuple(dom["capacities"]),
        n_bidders=int(dom["n_bidders"]),
        interest_size=tuple(dom["interest_size"]) if dom.get("interest_size") else None,
        base_range=tuple(dom.get("base_range", (1.0, 2.0))),
        synergy_range=tuple(dom.get("synergy_range", (0.0, 0.3))),
        scale_range=tuple(dom.get("scale_range", (1.0, 1.0))),
        n_threshold_terms=int(dom.get("n_threshold_terms", 0)),
        bonus_range=tuple(dom.get("bonus_range", (0.0, 1.0))),
    )
    return ExperimentConfig(
        domain=spec,
        seeds=expand_seeds(doc["seeds"]),
        mechanisms=tuple(mechanism_spec_from_dict(m) for m in doc["mechanisms"]),
        trace_efficiency=bool(doc.get("trace_efficiency", True)),
    )


def experiment_config_to_dict(cfg: ExperimentConfig) -> dict:
    dom = dataclasses.asdict(cfg.domain)
    return {
        "domain": dom,
        "seeds": list(cfg.seeds),
        "mechanisms": [dataclasses.asdict(m) for m in cfg.mechanisms],
        "trace_efficiency": cfg.trace_efficiency,
    }


# --- single runs ----------------------------------------------------------------

def build_mechanism_configs(spec: MechanismSpec, reserve: Price, seed: int):
    if spec.mechanism == "cca":
        return CcaConfig(reserve, spec.increment, spec.q_max)
    arch = Architecture(spec.hidden_dims, linear_skip=spec.linear_skip)
    train = TrainConfig(
        epochs=spec.train_epochs, learning_rate=spec.train_lr, l2=spec.train_l2
    )
    nxt = NextPriceConfig(
        epochs=spec.np_epochs,
        learning_rate=spec.np_lr,
        decay=spec.np_decay,
        mu=spec.mu if spec.constrained else 0.0,
        nu=spec.nu if spec.constrained else 0.0,
    )
    return MlCcaConfig(
        q_init=spec.q_init,
        q_max=spec.q_max,
        reserve_prices=reserve,
        f_init_increment=spec.f_init_increment,
        cca_increment=spec.increment,
        train=train,
        next_price=nxt,
        architecture=arch,
        perfect_ml=spec.perfect_ml,
        heuristic=spec.heuristic,
        q_p_max=spec.q_p_max,
        payment_rule=spec.payment_rule,
        seed=seed,
    )


def run_one(models, spec: MechanismSpec, seed: int) -> AuctionOutcome:
    caps = models[0].capacities
    reserve = default_reserve(models, spec.reserve_rho)
    cfg = build_mechanism_configs(spec, reserve, seed)
    if spec.mechanism == "cca":
        return run_cca(models, cfg, heuristic=spec.heuristic,
                       q_p_max=spec.q_p_max, payment_rule=spec.payment_rule)
    return run_ml_cca(models, cfg)


def heuristic_allocations(outcome: AuctionOutcome, models) -> dict:
    """Final allocations under each supplementary heuristic, for metrics.

    The clock entry is the clearing allocation when the market cleared,
    otherwise the winner determination over inferred clock bids alone.
    """
    caps = outcome.capacities
    if outcome.cleared:
        clock_alloc = outcome.allocation
    else:
        clock_alloc = oracles.wdp_reports(outcome.reports, caps)
    raised = raised_clock_bids(outcome.reports, models)
    raised_alloc, _, _ = wdp_with_bids(outcome.reports, raised, caps)
    final_price = outcome.price_history[-1]
    profit = [
        list(r) + profit_max_bids(m, final_price, 100)
        for r, m in zip(raised, models)
    ]
    profit_alloc, _, _ = wdp_with_bids(outcome.reports, profit, caps)
    return {"clock": clock_alloc, "raised": raised_alloc, "profit": profit_alloc}


def outcome_metrics(outcome: AuctionOutcome, models, optimum: float) -> dict:
    caps = outcome.capacities
    allocs = heuristic_allocations(outcome, models)
    return {
        "rounds": outcome.rounds,
        "cleared": int(outcome.cleared),
        "e_clock": metrics.efficiency(allocs["clock"], models, caps, optimum),
        "e_raise": metrics.efficiency(allocs["raised"], models, caps, optimum),
        "e_profit": metrics.efficiency(allocs["profit"], models, caps, optimum),
    }


def round_trace(outcome: AuctionOutcome, models, optimum: float,
                with_efficiency: bool) -> list[dict]:
    """Per-round price, demand, clearing error and running efficiency."""
    caps = outcome.capacities
    m = len(caps)
    rows = []
    running: list[list[DemandObservation]] = [[] for _ in models]
    for r, (price, demands) in enumerate(zip(outcome.price_history, outcome.demand_history)):
        for i, bundle in enumerate(demands):
            running[i].append(DemandObservation(bundle, price, r))
        row = {
            "round": r,
            "clearing_error": metrics.clearing_error(demands, caps),
        }
        for j in range(m):
            row[f"p_{j}"] = price[j]
        for j in range(m):
            row[f"d_{j}"] = sum(b[j] for b in demands)
        if with_efficiency:
            clock_alloc = oracles.wdp_reports(running, caps)
            raised = raised_clock_bids(running, models)
            raised_alloc, _, _ = wdp_with_bids(running, raised, caps)
            row["e_clock"] = metrics.efficiency(clock_alloc, models, caps, optimum)
            row["e_raise"] = metrics.efficiency(raised_alloc, models, caps, optimum)
        rows.append(row)
    return rows


def outcome_to_dict(outcome: AuctionOutcome, seed: int, mode: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mechanism": outcome.mechanism,
        "mode": mode,
        "seed": seed,
        "capacities": list(outcome.capacities),
        "allocation": [list(b) for b in outcome.allocation],
        "payments": list(outcome.payments),
        "cleared": outcome.cleared,
        "rounds": outcome.rounds,
        "price_history": [list(p) for p in outcome.price_history],
        "demand_history": [[list(b) for b in d] for d in outcome.demand_history],
        "reports": [
            [{"bundle": list(o.bundle), "price": list(o.price), "round": o.round}
             for o in obs_list]
            for obs_list in outcome.reports
        ],
    }


def _run_seed(args):
    cfg_doc, seed = args
    cfg = experiment_config_from_dict(cfg_doc)
    models = generate_synergy_model(seed, cfg.domain)
    caps = cfg.domain.capacities
    _, optimum = oracles.wdp_true(models, caps)
    rows, outcome_docs, trace_docs, timing_rows = [], [], [], []
    for spec in cfg.mechanisms:
        started = time.perf_counter()
        outcome = run_one(models, spec, seed)
        elapsed_ms = int(round(1000.0 * (time.perf_counter() - started)))
        stats = outcome_metrics(outcome, models, optimum)
        row = {"seed": seed, "mechanism": spec.mechanism, "mode": spec.mode, **stats}
        rows.append(row)
        timing_rows.append({
            "seed": seed, "mechanism": spec.mechanism, "mode": spec.mode,
            "wallclock_ms": elapsed_ms,
        })
        outcome_doc = outcome_to_dict(outcome, seed, spec.mode)
        outcome_doc["metrics"] = stats
        outcome_docs.append(outcome_doc)
        trace_docs.append({
            "seed": seed,
            "mechanism": spec.mechanism,
            "mode": spec.mode,
            "rows": round_trace(outcome, models, optimum, cfg.trace_efficiency),
        })
    return {"rows": rows, "outcomes": outcome_docs, "traces": trace_docs,
            "timings": timing_rows}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """Run all (seed, mechanism) cells; output is independent of worker count."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    cfg_doc = experiment_config_to_dict(cfg)
    tasks = [(cfg_doc, seed) for seed in cfg.seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_run_seed, tasks))
    else:
        per_seed = [_run_seed(t) for t in tasks]

    rows = [row for chunk in per_seed for row in chunk["rows"]]
    outcomes = [doc for chunk in per_seed for doc in chunk["outcomes"]]
    traces = [doc for chunk in per_seed for doc in chunk["traces"]]
    timings = [row for chunk in per_seed for row in chunk["timings"]]
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg_doc,
        "rows": rows,
        "outcomes": outcomes,
        "traces": traces,
        "timings": timings,
        "summary": summarize(rows),
    }


def summarize(rows: Sequence[dict]) -> dict:
    """Per-mechanism means; recomputable exactly from the result rows."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["mechanism"], row["mode"]), []).append(row)
    out = {}
    for (mech, mode), members in sorted(groups.items()):
        n = len(members)
        out[f"{mech}/{mode}"] = {
            "runs": n,
            "clear_rate": sum(r["cleared"] for r in members) / n,
            "mean_rounds": sum(r["rounds"] for r in members) / n,
            "mean_e_clock": sum(r["e_clock"] for r in members) / n,
            "mean_e_raise": sum(r["e_raise"] for r in members) / n,
            "mean_e_profit": sum(r["e_profit"] for r in members) / n,
        }
    return out


# --- file emission -----------------------------------------------------------

def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_format_cell(row[f]) for f in fields])
    return buf.getvalue()


def trace_to_csv(trace_doc: dict) -> str:
    rows = trace_doc["rows"]
    if not rows:
        return ""
    fields = list(rows[0].keys())
    return rows_to_csv(rows, fields)


def write_result_files(result: dict, outdir: str | Path) -> list[Path]:
    """Materialize an experiment result document as files on disk."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    rows = sorted(result["rows"], key=lambda r: (r["seed"], r["mechanism"], r["mode"]))
    results_csv = outdir / "results.csv"
    results_csv.write_text(rows_to_csv(rows, RESULT_FIELDS))
    written.append(results_csv)

    timings = sorted(result["timings"], key=lambda r: (r["seed"], r["mechanism"], r["mode"]))
    timings_csv = outdir / "timings.csv"
    timings_csv.write_text(rows_to_csv(timings, TIMING_FIELDS))
    written.append(timings_csv)

    summary = outdir / "summary.json"
    summary.write_text(json.dumps(
        {"schema_version": result["schema_version"], "summary": result["summary"]},
        indent=2, sort_keys=True) + "\n")
    written.append(summary)

    outcome_dir = outdir / "outcomes"
    outcome_dir.mkdir(exist_ok=True)
    for doc in result["outcomes"]:
        path = outcome_dir / f"seed_{doc['seed']}_{doc['mechanism']}_{doc['mode']}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append(path)

    trace_dir = outdir / "traces"
    trace_dir.mkdir(exist_ok=True)
    for doc in result["traces"]:
        path = trace_dir / f"seed_{doc['seed']}_{doc['mechanism']}_{doc['mode']}.csv"
        path.write_text(trace_to_csv(doc))
        written.append(path)
    return written


# --- worked examples ------------------------------------------------------------

def two_item_example_models():
    """Two bidders over two items with ten copies each, values via thresholds.

    No linear price clears this market: each bidder's demand is one of three
    large bundles, and no pair of them fits the capacities except the two
    mid-size bundles, which are demanded only when both prices reach 0.5.
    """
    caps = (10, 10)
    v1 = ThresholdValuation(caps, combine="max", terms=(
        ((7, 3), 10.0), ((3, 7), 10.0), ((4, 4), 9.0)))
    v2 = ThresholdValuation(caps, combine="max", terms=(
        ((8, 2), 10.0), ((2, 8), 10.0), ((4, 4), 9.0)))
    return caps, [v1, v2]


def single_item_example_models():
    """One item, ten copies; a block buyer of six against a two-step buyer."""
    caps = (10,)
    v1 = ThresholdValuation(caps, combine="sum", terms=(((6,), 6.0),))
    v2 = ThresholdValuation(caps, combine="sum", terms=(((1,), 3.0), ((5,), 2.0)))
    return caps, [v1, v2]


def _reports_at(models, query_prices) -> list[list[DemandObservation]]:
    reports: list[list[DemandObservation]] = [[] for _ in models]
    for r, p in enumerate(query_prices):
        demands = oracles.demands_at(models, p)
        for i, bundle in enumerate(demands):
            reports[i].append(DemandObservation(bundle, p, r))
    return reports


def reproduce_examples(seed: int = 7, np_epochs: int = 300) -> dict:
    """Re-run both worked micro-domains end to end and check their headline numbers.

    The feasibility-biased price search must settle just above the
    under-demand boundary, where winner determination over the elicited
    responses recovers the efficient allocation; querying only the
    unconstrained minimizers lands strictly below it and caps the winner
    determination at the inefficient outcome.
    """
    report = {"examples": [], "passed": True}

    def check(example, name, passed, detail):
        example["checks"].append({"name": name, "passed": bool(passed), "detail": detail})
        if not passed:
            report["passed"] = False

    np_cfg = NextPriceConfig(epochs=np_epochs, seed=seed)
    np_cfg_free = dataclasses.replace(np_cfg, mu=0.0, nu=0.0)

    # -- two items ---------------------------------------------------------
    caps, models = two_item_example_models()
    example = {"name": "two-item", "checks": []}
    report["examples"].append(example)

    anchor = (0.5, 0.5)
    p_c, _ = prices_mod.next_price(models, anchor, np_cfg)
    check(example, "constrained price near (0.5, 0.5)",
          abs(p_c[0] - 0.5) <= 0.05 and abs(p_c[1] - 0.5) <= 0.05, list(p_c))
    demands_c = oracles.demands_at(models, p_c)
    check(example, "constrained demand is the splittable pair",
          demands_c == ((4, 4), (4, 4)), [list(b) for b in demands_c])

    restricted = [(x, x) for x in (0.1, 0.2, 0.3, 0.4)]
    full_reports = _reports_at(models, restricted + [p_c])
    alloc_full = oracles.wdp_reports(full_reports, caps)
    scw_full = domain.social_welfare(alloc_full, models)
    check(example, "full-query WDP welfare is 18", scw_full == 18.0, scw_full)

    restricted_reports = _reports_at(models, restricted)
    alloc_restricted = oracles.wdp_reports(restricted_reports, caps)
    scw_restricted = domain.social_welfare(alloc_restricted, models)
    check(example, "restricted-query WDP welfare is 10", scw_restricted == 10.0, scw_restricted)

    p_u, _ = prices_mod.next_price(models, anchor, np_cfg_free)
    w_u = prices_mod.clearing_objective(p_u, models, caps)
    check(example, "unconstrained search reaches the flat minimum of W",
          w_u <= 20.0 + 0.05, {"price": list(p_u), "W": w_u})

    # -- single item --------------------------------------------------------
    caps1, models1 = single_item_example_models()
    example = {"name": "single-item", "checks": []}
    report["examples"].append(example)

    p_c1, _ = prices_mod.next_price(models1, (0.5,), np_cfg)
    check(example, "constrained price stays above 0.5", p_c1[0] > 0.5, list(p_c1))
    demands1 = oracles.demands_at(models1, p_c1)
    check(example, "demand splits six and one", demands1 == ((6,), (1,)),
          [list(b) for b in demands1])
    scw1 = domain.social_welfare(demands1, models1)
    check(example, "cleared-side welfare is 9", scw1 == 9.0, scw1)

    restricted1 = [(x,) for x in (0.05, 0.15, 0.25, 0.35, 0.45)]
    rep1 = _reports_at(models1, restricted1)
    alloc1 = oracles.wdp_reports(rep1, caps1)
    scw_r1 = domain.social_welfare(alloc1, models1)
    check(example, "restricted-query WDP welfare is 6", scw_r1 == 6.0, scw_r1)

    return report


# --- prediction export ------------------------------------------------------------

@dataclass(frozen=True)
class PredictionExportSpec:
    n_val_bundles: int = 200
    n_val_prices: int = 50
    price_scale: float = 3.0
    seed: int = 0


def export_prediction_rows(
    net: MonotoneNet,
    model,
    spec: PredictionExportSpec,
    reports: Sequence[DemandObservation] = (),
) -> list[dict]:
    """Rows for a prediction-vs-true plot: train points plus two validation sets.

    Validation set 1 samples bundles uniformly; validation set 2 samples
    demand responses at prices drawn up to `price_scale` times the bidder's
    best single-copy value, which focuses the comparison on the bundles that
    matter during an auction.  The inferred column is the price paid at the
    observation: a lower bound on the true value.
    """
    caps = model.capacities
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed)))
    rows = []

    for obs in reports:
        rank = domain.rank_of(obs.bundle, caps)
        rows.append({
            "set": "train",
            "rank": rank,
            "true_value": model.value(obs.bundle),
            "predicted_value": net.value(obs.bundle),
            "inferred_lower_bound": obs.inferred_value(),
        })

    size = domain.space_size(caps)
    for rank in rng.integers(0, size, size=spec.n_val_bundles):
        bundle = domain.bundle_of_rank(int(rank), caps)
        rows.append({
            "set": "val1",
            "rank": int(rank),
            "true_value": model.value(bundle),
            "predicted_value": net.value(bundle),
            "inferred_lower_bound": "",
        })

    single_best = max(
        model.value(tuple(1 if k == j else 0 for k in range(len(caps))))
        for j in range(len(caps))
    )
    hi = spec.price_scale * single_best
    for _ in range(spec.n_val_prices):
        price = tuple(float(v) for v in rng.uniform(0.0, hi, size=len(caps)))
        bundle = oracles.argmax_utility(model, price)
        rows.append({
            "set": "val2",
            "rank": domain.rank_of(bundle, caps),
            "true_value": model.value(bundle),
            "predicted_value": net.value(bundle),
            "inferred_lower_bound": domain.inner_product(price, bundle),
        })
    return rows


def prediction_rows_to_csv(rows: Sequence[dict]) -> str:
    fields = ["set", "rank", "true_value", "predicted_value", "inferred_lower_bound"]
    return rows_to_csv(rows, fields)
