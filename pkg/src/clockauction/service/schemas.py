"""Request/response models for the auction service.

Domain, net and outcome documents follow the package's JSON schemas and are
carried as plain dicts here; pydantic validates the envelope and the scalar
knobs, the core validates the payloads.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class DomainSpecModel(BaseModel):
    capacities: list[int]
    n_bidders: int
    interest_size: list[int] | None = None
    base_range: list[float] = [1.0, 2.0]
    synergy_range: list[float] = [0.0, 0.3]
    scale_range: list[float] = [1.0, 1.0]
    n_threshold_terms: int = 0
    bonus_range: list[float] = [0.0, 1.0]


class GenerateDomainRequest(BaseModel):
    seed: int
    spec: DomainSpecModel


class DomainDocument(BaseModel):
    schema_version: int = 1
    capacities: list[int]
    bidders: list[dict]


class ObservationModel(BaseModel):
    bundle: list[int]
    price: list[float]
    round: int


class ArchitectureModel(BaseModel):
    hidden_dims: list[int] = [16]
    cutoff: float = 1.0
    linear_skip: bool = False


class TrainConfigModel(BaseModel):
    epochs: int = 30
    learning_rate: float = 0.01
    l2: float = 0.0
    cosine_schedule: bool = False
    optimizer: str = "sgd"
    shuffle: bool = False
    seed: int = 0


class TrainRequest(BaseModel):
    capacities: list[int]
    observations: list[ObservationModel]
    architecture: ArchitectureModel = Field(default_factory=ArchitectureModel)
    config: TrainConfigModel = Field(default_factory=TrainConfigModel)
    init_seed: int = 0


class TrainResponse(BaseModel):
    net: dict
    epoch_losses: list[float]
    epoch_mismatches: list[int]
    steps: int
    converged_epoch: int | None


class NextPriceConfigModel(BaseModel):
    epochs: int = 300
    learning_rate: float = 0.01
    decay: float = 0.005
    mu: float = 2.0
    nu: float = 1.01
    seed: int = 0
    overdemand_factor: str = "mu"


class NextPriceRequest(BaseModel):
    anchor: list[float]
    nets: list[dict] | None = None       # serialized nets ...
    domain: DomainDocument | None = None  # ... or true models (perfect-ml mode)
    config: NextPriceConfigModel = Field(default_factory=NextPriceConfigModel)


class NextPriceResponse(BaseModel):
    price: list[float]
    objective: float
    predicted_demand: list[int]
    feasible: bool
    cleared: bool
    iterations: int


class CcaRequest(BaseModel):
    domain: DomainDocument
    reserve_prices: list[float] | None = None
    reserve_rho: float = 0.1
    increment: float = 0.05
    q_max: int = 100
    heuristic: str = "clock"
    q_p_max: int = 100
    payment_rule: str = "vcg"


class MlAuctionRequest(BaseModel):
    domain: DomainDocument
    reserve_prices: list[float] | None = None
    reserve_rho: float = 0.1
    q_init: int = 10
    q_max: int = 30
    f_init_increment: float | None = None
    cca_increment: float = 0.05
    perfect_ml: bool = False
    constrained: bool = True
    architecture: ArchitectureModel = Field(default_factory=ArchitectureModel)
    train: TrainConfigModel = Field(default_factory=TrainConfigModel)
    next_price: NextPriceConfigModel = Field(default_factory=NextPriceConfigModel)
    heuristic: str = "clock"
    q_p_max: int = 100
    payment_rule: str = "vcg"
    seed: int = 0


class OutcomeResponse(BaseModel):
    outcome: dict
    metrics: dict


class ExperimentRequest(BaseModel):
    config: dict
    workers: int | None = None


class EvalRequest(BaseModel):
    outcome: dict
    domain: DomainDocument


class ReproduceRequest(BaseModel):
    seed: int = 7
    epochs: int = 300


class PredictionExportRequest(BaseModel):
    net: dict
    domain: DomainDocument
    bidder: int = 0
    observations: list[ObservationModel] = []
    n_val_bundles: int = 200
    n_val_prices: int = 50
    price_scale: float = 3.0
    seed: int = 0


class PredictionExportResponse(BaseModel):
    rows: list[dict]
    csv: str
