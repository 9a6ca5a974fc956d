"""Fitting a monotone net to one bidder's demand-query observations.

A demand response pins down, for the observed prices, that the chosen bundle
beat every other bundle's utility.  The loss of an observation is therefore
the predicted utility gap between the net's own favourite bundle and the
observed one: zero exactly when the net would have answered the query the
same way, strictly positive otherwise.  Training walks the observations in
round order and takes one projected gradient step per mismatch.

Because only utility differences are constrained, the data identifies the
value function at most up to a constant shift; compare demand responses or
shift-invariant metrics, never raw predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import oracles
from .domain import DemandObservation, inner_product, rank_of
from .errors import DomainError
from .nets import MonotoneNet


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.01
    l2: float = 0.0
    cosine_schedule: bool = False
    optimizer: str = "sgd"  # "sgd" per the reference update rule, or "adam"
    shuffle: bool = False
    batch_per_epoch: bool = False  # accumulate mismatch gradients, one step per epoch
    seed: int = 0
    stop_when_fit: bool = True  # later epochs cannot change a zero-loss net

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise DomainError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.l2 < 0:
            raise DomainError(f"l2 must be >= 0, got {self.l2}")
        if self.optimizer not in ("sgd", "adam"):
            raise DomainError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    epoch_mismatches: list[int] = field(default_factory=list)
    steps: int = 0
    converged_epoch: int | None = None

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else 0.0


def dq_loss(net: MonotoneNet, obs: DemandObservation) -> float:
    """Predicted utility the net believes the observed response left on the table.

    Zero iff the net's demand at the observed prices matches the observation
    under the deterministic tie-break; otherwise nonnegative by optimality of
    the net's own argmax.
    """
    predicted, predicted_utility = oracles.demand_and_utility(net, obs.price)
    if predicted == obs.bundle:
        return 0.0
    observed_utility = (
        float(net.value_table()[rank_of(obs.bundle, net.capacities)])
        - inner_product(obs.price, obs.bundle)
    )
    return predicted_utility - observed_utility


def _loss_grads(net: MonotoneNet, predicted, observed, l2: float):
    """Parameter gradient of the utility-difference loss.

    The price terms do not depend on the parameters, and the argmax bundle is
    locally constant, so the gradient is grad(net, predicted) minus
    grad(net, observed); L2 decay applies to weights only.
    """
    g_pred = net.grad_params(predicted)
    g_obs = net.grad_params(observed)
    grads = [gp - go for gp, go in zip(g_pred, g_obs)]
    if l2 > 0:
        for g, (arr, kind) in zip(grads, net.param_arrays()):
            if kind == "weight":
                g += l2 * arr
    return grads


class _Sgd:
    def __init__(self, net: MonotoneNet):
        pass

    def step(self, net: MonotoneNet, grads, lr: float):
        for (arr, _), g in zip(net.param_arrays(), grads):
            arr -= lr * g


class _Adam:
    def __init__(self, net: MonotoneNet, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(arr) for arr, _ in net.param_arrays()]
        self.v = [np.zeros_like(arr) for arr, _ in net.param_arrays()]

    def step(self, net: MonotoneNet, grads, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, ((arr, _), g) in enumerate(zip(net.param_arrays(), grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            arr -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_on_dqs(
    net: MonotoneNet,
    observations: Sequence[DemandObservation],
    cfg: TrainConfig,
) -> tuple[MonotoneNet, TrainReport]:
    """Projected (stochastic) gradient descent on the demand-query loss.

    Returns a trained copy; the input net is left untouched.  Observations
    are replayed in round order each epoch (seeded shuffling optional); a
    step is taken only when the net's predicted demand mismatches, and the
    sign constraints are re-projected after every step.
    """
    if not observations:
        raise DomainError("need at least one observation")
    obs_sorted = sorted(observations, key=lambda o: o.round)
    net = net.copy()
    opt = _Adam(net) if cfg.optimizer == "adam" else _Sgd(net)
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    report = TrainReport()

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate
        if cfg.cosine_schedule:
            lr = cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
        order = list(range(len(obs_sorted)))
        if cfg.shuffle:
            rng.shuffle(order)
        epoch_loss = 0.0
        mismatches = 0
        accumulated = None
        for idx in order:
            obs = obs_sorted[idx]
            predicted, predicted_utility = oracles.demand_and_utility(net, obs.price)
            if predicted == obs.bundle:
                continue
            observed_utility = (
                float(net.value_table()[rank_of(obs.bundle, net.capacities)])
                - inner_product(obs.price, obs.bundle)
            )
            epoch_loss += predicted_utility - observed_utility
            mismatches += 1
            grads = _loss_grads(net, predicted, obs.bundle, cfg.l2)
            if cfg.batch_per_epoch:
                if accumulated is None:
                    accumulated = grads
                else:
                    accumulated = [a + g for a, g in zip(accumulated, grads)]
            else:
                opt.step(net, grads, lr)
                net.project_()
                report.steps += 1
        if cfg.batch_per_epoch and accumulated is not None:
            opt.step(net, accumulated, lr)
            net.project_()
            report.steps += 1
        report.epoch_losses.append(epoch_loss)
        report.epoch_mismatches.append(mismatches)
        if mismatches == 0:
            report.converged_epoch = epoch
            if cfg.stop_when_fit:
                break
    return net, report


def fits_all_observations(net: MonotoneNet, observations: Sequence[DemandObservation]) -> bool:
    """True iff the net reproduces every observed demand response exactly."""
    return all(oracles.argmax_utility(net, o.price) == o.bundle for o in observations)
