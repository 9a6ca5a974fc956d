"""FastAPI service wrapping the auction engine.

Every capability of the package is reachable as a request/response endpoint;
the CLI is a thin client of this app.  Handlers are synchronous and
deterministic given the request payload.
"""

from __future__ import annotations

import dataclasses

from fastapi import FastAPI, HTTPException

from .. import __version__, experiments, oracles, values
from ..domain import DemandObservation
from ..errors import AuctionError, ResourceLimitError
from ..mechanisms import CcaConfig, MlCcaConfig, default_reserve, run_cca, run_ml_cca
from ..nets import Architecture, init as net_init, net_from_dict, net_to_dict
from ..prices import NextPriceConfig, next_price
from ..training import TrainConfig, train_on_dqs
from . import schemas


def _models_from_doc(doc) -> tuple:
    caps, models = values.domain_from_dict(doc if isinstance(doc, dict) else doc.model_dump())
    return caps, models


def _observations(items) -> list[DemandObservation]:
    return [DemandObservation(tuple(o.bundle), tuple(o.price), o.round) for o in items]


def _train_config(m: schemas.TrainConfigModel) -> TrainConfig:
    return TrainConfig(
        epochs=m.epochs, learning_rate=m.learning_rate, l2=m.l2,
        cosine_schedule=m.cosine_schedule, optimizer=m.optimizer,
        shuffle=m.shuffle, seed=m.seed,
    )


def _next_price_config(m: schemas.NextPriceConfigModel) -> NextPriceConfig:
    return NextPriceConfig(
        epochs=m.epochs, learning_rate=m.learning_rate, decay=m.decay,
        mu=m.mu, nu=m.nu, seed=m.seed, overdemand_factor=m.overdemand_factor,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="clockauction", version=__version__)

    @app.exception_handler(AuctionError)
    def _auction_error(request, exc: AuctionError):
        from fastapi.responses import JSONResponse

        status = 413 if isinstance(exc, ResourceLimitError) else 422
        return JSONResponse(status_code=status,
                            content={"detail": f"{type(exc).__name__}: {exc}"})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/domain/generate", response_model=schemas.DomainDocument)
    def generate_domain(req: schemas.GenerateDomainRequest):
        spec = values.SynergyDomainSpec(
            capacities=tuple(req.spec.capacities),
            n_bidders=req.spec.n_bidders,
            interest_size=tuple(req.spec.interest_size) if req.spec.interest_size else None,
            base_range=tuple(req.spec.base_range),
            synergy_range=tuple(req.spec.synergy_range),
            scale_range=tuple(req.spec.scale_range),
            n_threshold_terms=req.spec.n_threshold_terms,
            bonus_range=tuple(req.spec.bonus_range),
        )
        models = values.generate_synergy_model(req.seed, spec)
        return schemas.DomainDocument(**values.domain_to_dict(spec.capacities, models))

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        caps = tuple(req.capacities)
        arch = Architecture(tuple(req.architecture.hidden_dims),
                            cutoff=req.architecture.cutoff,
                            linear_skip=req.architecture.linear_skip)
        net = net_init(arch, caps, req.init_seed)
        trained, report = train_on_dqs(net, _observations(req.observations),
                                       _train_config(req.config))
        return schemas.TrainResponse(
            net=net_to_dict(trained),
            epoch_losses=report.epoch_losses,
            epoch_mismatches=report.epoch_mismatches,
            steps=report.steps,
            converged_epoch=report.converged_epoch,
        )

    @app.post("/next-price", response_model=schemas.NextPriceResponse)
    def next_price_endpoint(req: schemas.NextPriceRequest):
        if req.nets:
            vals = [net_from_dict(d) for d in req.nets]
        elif req.domain is not None:
            _, vals = _models_from_doc(req.domain)
        else:
            raise HTTPException(status_code=422, detail="provide nets or a domain")
        price, trace = next_price(vals, tuple(req.anchor), _next_price_config(req.config))
        chosen = trace.steps[
            trace.best_feasible_index if trace.ever_feasible and not _next_price_config(req.config).unconstrained
            else trace.best_index
        ]
        return schemas.NextPriceResponse(
            price=list(price),
            objective=chosen.objective,
            predicted_demand=list(chosen.demand),
            feasible=chosen.feasible,
            cleared=trace.cleared,
            iterations=len(trace.steps),
        )

    @app.post("/auction/cca", response_model=schemas.OutcomeResponse)
    def auction_cca(req: schemas.CcaRequest):
        caps, models = _models_from_doc(req.domain)
        reserve = tuple(req.reserve_prices) if req.reserve_prices else default_reserve(models, req.reserve_rho)
        cfg = CcaConfig(reserve, req.increment, req.q_max)
        outcome = run_cca(models, cfg, heuristic=req.heuristic,
                          q_p_max=req.q_p_max, payment_rule=req.payment_rule)
        _, optimum = oracles.wdp_true(models, caps)
        stats = experiments.outcome_metrics(outcome, models, optimum)
        return schemas.OutcomeResponse(
            outcome=experiments.outcome_to_dict(outcome, seed=-1, mode="service"),
            metrics=stats,
        )

    @app.post("/auction/ml", response_model=schemas.OutcomeResponse)
    def auction_ml(req: schemas.MlAuctionRequest):
        caps, models = _models_from_doc(req.domain)
        reserve = tuple(req.reserve_prices) if req.reserve_prices else default_reserve(models, req.reserve_rho)
        nxt = _next_price_config(req.next_price)
        if not req.constrained:
            nxt = dataclasses.replace(nxt, mu=0.0, nu=0.0)
        cfg = MlCcaConfig(
            q_init=req.q_init, q_max=req.q_max, reserve_prices=reserve,
            f_init_increment=req.f_init_increment, cca_increment=req.cca_increment,
            train=_train_config(req.train), next_price=nxt,
            architecture=Architecture(tuple(req.architecture.hidden_dims),
                                      cutoff=req.architecture.cutoff,
                                      linear_skip=req.architecture.linear_skip),
            perfect_ml=req.perfect_ml, heuristic=req.heuristic,
            q_p_max=req.q_p_max, payment_rule=req.payment_rule, seed=req.seed,
        )
        outcome = run_ml_cca(models, cfg)
        _, optimum = oracles.wdp_true(models, caps)
        stats = experiments.outcome_metrics(outcome, models, optimum)
        return schemas.OutcomeResponse(
            outcome=experiments.outcome_to_dict(outcome, seed=req.seed, mode="service"),
            metrics=stats,
        )

    @app.post("/experiments/run")
    def experiments_run(req: schemas.ExperimentRequest):
        cfg = experiments.experiment_config_from_dict(req.config)
        return experiments.run_experiment(cfg, workers=req.workers)

    @app.post("/metrics/eval")
    def metrics_eval(req: schemas.EvalRequest):
        caps, models = _models_from_doc(req.domain)
        doc = req.outcome
        reports = [
            [DemandObservation(tuple(o["bundle"]), tuple(o["price"]), o["round"])
             for o in obs_list]
            for obs_list in doc["reports"]
        ]
        from ..mechanisms import AuctionOutcome

        outcome = AuctionOutcome(
            mechanism=doc["mechanism"],
            capacities=caps,
            allocation=tuple(tuple(b) for b in doc["allocation"]),
            payments=tuple(doc["payments"]),
            reports=reports,
            price_history=[tuple(p) for p in doc["price_history"]],
            demand_history=[tuple(tuple(b) for b in d) for d in doc["demand_history"]],
            cleared=doc["cleared"],
            rounds=doc["rounds"],
        )
        _, optimum = oracles.wdp_true(models, caps)
        return experiments.outcome_metrics(outcome, models, optimum)

    @app.post("/reproduce-examples")
    def reproduce(req: schemas.ReproduceRequest):
        return experiments.reproduce_examples(seed=req.seed, np_epochs=req.epochs)

    @app.post("/predictions/export", response_model=schemas.PredictionExportResponse)
    def predictions_export(req: schemas.PredictionExportRequest):
        caps, models = _models_from_doc(req.domain)
        if not (0 <= req.bidder < len(models)):
            raise HTTPException(status_code=422, detail=f"no bidder {req.bidder}")
        net = net_from_dict(req.net)
        spec = experiments.PredictionExportSpec(
            n_val_bundles=req.n_val_bundles, n_val_prices=req.n_val_prices,
            price_scale=req.price_scale, seed=req.seed,
        )
        rows = experiments.export_prediction_rows(
            net, models[req.bidder], spec, _observations(req.observations)
        )
        return schemas.PredictionExportResponse(
            rows=rows, csv=experiments.prediction_rows_to_csv(rows)
        )

    return app
