"""True valuation models: tabular, threshold-indicator and seeded synthetic.

Every model is monotone ("more copies never hurt") and normalized (the empty
bundle is worth zero), immutable after construction, and exposes the small
interface the oracles need: ``capacities``, ``value(bundle)`` and a cached
``value_table()`` over the full bundle space in rank order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import domain
from .domain import Bundle, Capacities
from .errors import DomainError, ResourceLimitError

SCHEMA_VERSION = 1


class _BaseModel:
    capacities: Capacities

    def value(self, bundle: Sequence[int]) -> float:
        raise NotImplementedError

    def value_table(self, cap: int = domain.DEFAULT_SPACE_CAP) -> np.ndarray:
        """Values of all bundles in mixed-radix rank order (cached)."""
        cached = getattr(self, "_table", None)
        if cached is None:
            if domain.space_size(self.capacities) > cap:
                raise ResourceLimitError(
                    f"domain of size {domain.space_size(self.capacities)} exceeds cap {cap}"
                )
            table = np.array(
                [self.value(x) for x in domain.iter_bundles(self.capacities)]
            )
            table.setflags(write=False)
            object.__setattr__(self, "_table", table)
            cached = table
        return cached


@dataclass(frozen=True)
class TabularValuation(_BaseModel):
    """Explicit value table over the whole bundle space, in rank order."""

    capacities: Capacities
    values: tuple[float, ...]

    def __post_init__(self):
        caps = domain.check_capacities(self.capacities)
        object.__setattr__(self, "capacities", caps)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != domain.space_size(caps):
            raise DomainError(
                f"table has {len(vals)} entries, domain has {domain.space_size(caps)}"
            )
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise DomainError("table values must be finite and >= 0")
        if vals[0] != 0.0:
            raise DomainError("empty bundle must have value 0")
        _check_table_monotone(np.asarray(vals), caps)
        object.__setattr__(self, "values", vals)

    def value(self, bundle: Sequence[int]) -> float:
        x = domain.check_bundle(bundle, self.capacities)
        return self.values[domain.rank_of(x, self.capacities)]


@dataclass(frozen=True)
class ThresholdValuation(_BaseModel):
    """Sum or max of bonuses that unlock once the bundle covers a threshold.

    ``value(x) = combine_t { w_t * 1[x >= threshold_t] }``.
    Monotone by construction; the all-zero threshold is rejected because it
    would pay a bonus for the empty bundle.
    """

    capacities: Capacities
    terms: tuple[tuple[Bundle, float], ...]
    combine: str = "sum"

    def __post_init__(self):
        caps = domain.check_capacities(self.capacities)
        object.__setattr__(self, "capacities", caps)
        if self.combine not in ("sum", "max"):
            raise DomainError(f"combine must be 'sum' or 'max', got {self.combine!r}")
        terms = []
        for threshold, bonus in self.terms:
            t = domain.check_bundle(threshold, caps)
            if all(v == 0 for v in t):
                raise DomainError("threshold (0,...,0) would break normalization")
            if bonus < 0 or not np.isfinite(bonus):
                raise DomainError(f"bonus must be finite and >= 0, got {bonus}")
            terms.append((t, float(bonus)))
        object.__setattr__(self, "terms", tuple(terms))

    def value(self, bundle: Sequence[int]) -> float:
        x = domain.check_bundle(bundle, self.capacities)
        hits = [w for t, w in self.terms if all(a >= b for a, b in zip(x, t))]
        if not hits:
            return 0.0
        return max(hits) if self.combine == "max" else sum(hits)


@dataclass(frozen=True)
class SynergyValuation(_BaseModel):
    """Per-copy base values on an interest set, amplified by package synergy.

    With ``k`` interest copies held, the bundle is worth
    ``(sum of base values of held copies) * (1 + synergy) ** (k - 1)``
    plus optional threshold bonuses.  Bigger packages of interesting items
    gain a fixed percentage per extra copy; items outside the interest set
    are worthless to this bidder.
    """

    capacities: Capacities
    interest: tuple[int, ...]
    base_values: tuple[float, ...]
    synergy: float = 0.0
    threshold_terms: tuple[tuple[Bundle, float], ...] = ()

    def __post_init__(self):
        caps = domain.check_capacities(self.capacities)
        object.__setattr__(self, "capacities", caps)
        interest = tuple(int(j) for j in self.interest)
        if len(set(interest)) != len(interest):
            raise DomainError("interest set has duplicates")
        if any(j < 0 or j >= len(caps) for j in interest):
            raise DomainError(f"interest items {interest} out of range for m={len(caps)}")
        base = tuple(float(b) for b in self.base_values)
        if len(base) != len(interest):
            raise DomainError("need one base value per interest item")
        if any(b < 0 or not np.isfinite(b) for b in base):
            raise DomainError("base values must be finite and >= 0")
        if self.synergy < 0:
            raise DomainError(f"synergy must be >= 0, got {self.synergy}")
        terms = []
        for threshold, bonus in self.threshold_terms:
            t = domain.check_bundle(threshold, caps)
            if all(v == 0 for v in t):
                raise DomainError("threshold (0,...,0) would break normalization")
            if bonus < 0 or not np.isfinite(bonus):
                raise DomainError(f"bonus must be finite and >= 0, got {bonus}")
            terms.append((t, float(bonus)))
        object.__setattr__(self, "interest", interest)
        object.__setattr__(self, "base_values", base)
        object.__setattr__(self, "threshold_terms", tuple(terms))

    def value(self, bundle: Sequence[int]) -> float:
        x = domain.check_bundle(bundle, self.capacities)
        copies = 0
        base_sum = 0.0
        for j, b in zip(self.interest, self.base_values):
            copies += x[j]
            base_sum += b * x[j]
        total = base_sum * (1.0 + self.synergy) ** max(copies - 1, 0)
        for t, w in self.threshold_terms:
            if all(a >= b for a, b in zip(x, t)):
                total += w
        return total


def _check_table_monotone(table: np.ndarray, capacities: Capacities) -> None:
    """Reject tables where removing a copy ever increases value.

    Comparing each bundle against its single-copy-removed neighbours is
    equivalent to checking all dominated pairs.
    """
    radix = _radix_strides(capacities)
    for rank, x in enumerate(domain.iter_bundles(capacities)):
        for j, c in enumerate(capacities):
            if x[j] > 0 and table[rank] < table[rank - radix[j]]:
                raise DomainError(
                    f"table not monotone at bundle {x} (item {j}): "
                    f"{table[rank]} < {table[rank - radix[j]]}"
                )


def _radix_strides(capacities: Capacities) -> tuple[int, ...]:
    strides = []
    s = 1
    for c in reversed(capacities):
        strides.append(s)
        s *= c + 1
    return tuple(reversed(strides))


def to_table(model, cap: int = domain.DEFAULT_SPACE_CAP) -> np.ndarray:
    """Full value table of any model, in rank order."""
    return model.value_table(cap=cap)


def tabulate(model, cap: int = domain.DEFAULT_SPACE_CAP) -> TabularValuation:
    """Freeze any model into an explicit TabularValuation."""
    return TabularValuation(model.capacities, tuple(to_table(model, cap=cap)))


@dataclass(frozen=True)
class SynergyDomainSpec:
    """Parameters of the seeded synthetic domain generator.

    ``interest_size=None`` gives every bidder the full item set.  National vs
    regional asymmetry is expressed through ``interest_size`` and
    ``scale_range``, not separate code paths.
    """

    capacities: Capacities
    n_bidders: int
    interest_size: tuple[int, int] | None = None
    base_range: tuple[float, float] = (1.0, 2.0)
    synergy_range: tuple[float, float] = (0.0, 0.3)
    scale_range: tuple[float, float] = (1.0, 1.0)
    n_threshold_terms: int = 0
    bonus_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        caps = domain.check_capacities(self.capacities)
        object.__setattr__(self, "capacities", caps)
        if self.n_bidders < 1:
            raise DomainError("need at least one bidder")
        if self.interest_size is not None:
            lo, hi = self.interest_size
            if not (1 <= lo <= hi <= len(caps)):
                raise DomainError(f"bad interest_size {self.interest_size} for m={len(caps)}")
        for name in ("base_range", "synergy_range", "scale_range", "bonus_range"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise DomainError(f"bad {name}: ({lo}, {hi})")
        if self.n_threshold_terms < 0:
            raise DomainError("n_threshold_terms must be >= 0")


def generate_synergy_model(seed: int, spec: SynergyDomainSpec) -> list[SynergyValuation]:
    """Draw one bidder population; identical (seed, spec) gives identical models."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    m = len(spec.capacities)
    models = []
    for _ in range(spec.n_bidders):
        if spec.interest_size is None:
            interest = tuple(range(m))
        else:
            lo, hi = spec.interest_size
            size = int(rng.integers(lo, hi + 1))
            interest = tuple(sorted(rng.choice(m, size=size, replace=False).tolist()))
        scale = float(rng.uniform(*spec.scale_range))
        base = tuple(scale * float(rng.uniform(*spec.base_range)) for _ in interest)
        synergy = float(rng.uniform(*spec.synergy_range))
        terms = []
        for _ in range(spec.n_threshold_terms):
            threshold = tuple(int(rng.integers(0, c + 1)) for c in spec.capacities)
            if all(v == 0 for v in threshold):
                threshold = (1,) + threshold[1:]
            terms.append((threshold, scale * float(rng.uniform(*spec.bonus_range))))
        models.append(
            SynergyValuation(
                capacities=spec.capacities,
                interest=interest,
                base_values=base,
                synergy=synergy,
                threshold_terms=tuple(terms),
            )
        )
    return models


# --- JSON document form ----------------------------------------------------

def model_to_dict(model) -> dict:
    if isinstance(model, TabularValuation):
        return {"kind": "tabular", "values": list(model.values)}
    if isinstance(model, ThresholdValuation):
        return {
            "kind": "threshold",
            "combine": model.combine,
            "terms": [{"threshold": list(t), "bonus": w} for t, w in model.terms],
        }
    if isinstance(model, SynergyValuation):
        return {
            "kind": "synergy",
            "interest": list(model.interest),
            "base_values": list(model.base_values),
            "synergy": model.synergy,
            "threshold_terms": [
                {"threshold": list(t), "bonus": w} for t, w in model.threshold_terms
            ],
        }
    raise DomainError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(capacities: Capacities, doc: dict):
    kind = doc.get("kind")
    if kind == "tabular":
        return TabularValuation(capacities, tuple(doc["values"]))
    if kind == "threshold":
        terms = tuple((tuple(t["threshold"]), float(t["bonus"])) for t in doc["terms"])
        return ThresholdValuation(capacities, terms, combine=doc.get("combine", "sum"))
    if kind == "synergy":
        terms = tuple(
            (tuple(t["threshold"]), float(t["bonus"]))
            for t in doc.get("threshold_terms", [])
        )
        return SynergyValuation(
            capacities,
            interest=tuple(doc["interest"]),
            base_values=tuple(doc["base_values"]),
            synergy=float(doc.get("synergy", 0.0)),
            threshold_terms=terms,
        )
    raise DomainError(f"unknown model kind {kind!r}")


def domain_to_dict(capacities: Capacities, models: Sequence) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "capacities": list(capacities),
        "bidders": [model_to_dict(m) for m in models],
    }


def domain_from_dict(doc: dict):
    caps = domain.check_capacities(doc["capacities"])
    models = [model_from_dict(caps, b) for b in doc["bidders"]]
    return caps, models
