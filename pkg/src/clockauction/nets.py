"""Monotone value networks over multiset bundle spaces.

The network is an ordinary MLP with three structural restrictions that make
it monotone and normalized by construction:

* every weight entry is >= 0 and every hidden bias entry is <= 0,
* hidden activations are bounded ReLUs ``brelu(z, t) = min(t, max(0, z))``
  with cutoff ``t > 0``; the output layer is linear with no bias,
* the input is first scaled by the fixed, non-trainable normalization
  ``x -> x / capacities`` so that inputs live in ``[0, 1]^m``.

Under these sign constraints the map is monotone in every input coordinate
and maps the empty bundle to exactly 0.  Conversely, ``construct_exact``
builds, for any monotone normalized value table, a three-hidden-layer
network of this class that reproduces the table exactly: an indicator
cascade detects, for each sorted bundle prefix, whether the input is
dominated by none of it, and the output layer sums the corresponding value
increments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import domain
from .domain import Bundle, Capacities
from .errors import DimensionError, DomainError, ResourceLimitError
from .values import _check_table_monotone

SCHEMA_VERSION = 1

#: construct_exact builds dense (|X|-1)^2 matrices; refuse beyond this
DEFAULT_EXACT_CAP = 4096


def brelu(z, t):
    """Bounded ReLU min(t, max(0, z)); elementwise on arrays."""
    if np.any(np.asarray(t) <= 0):
        raise DomainError(f"cutoff must be > 0, got {t}")
    return np.clip(z, 0.0, t)


@dataclass(frozen=True)
class Architecture:
    """Shape hyperparameters: hidden widths, shared cutoff, optional skip."""

    hidden_dims: tuple[int, ...]
    cutoff: float = 1.0
    linear_skip: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.hidden_dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise DomainError(f"need at least one hidden layer of width >= 1, got {dims}")
        if self.cutoff <= 0:
            raise DomainError(f"cutoff must be > 0, got {self.cutoff}")
        object.__setattr__(self, "hidden_dims", dims)


class MonotoneNet:
    """Constrained-parameter monotone network for one bidder.

    ``hidden_weights[k]``/``hidden_biases[k]`` parameterize hidden layer k
    with cutoff ``cutoffs[k]``; ``out_weights`` is the bias-free linear
    output; ``skip_weights`` (optional) adds a nonnegative linear term on
    the normalized input.  Mutating code must call :meth:`invalidate` (or
    mutate via :meth:`project_`) so the cached value table is rebuilt.
    """

    def __init__(self, capacities, hidden_weights, hidden_biases, cutoffs,
                 out_weights, skip_weights=None, *, validate=True):
        self.capacities: Capacities = domain.check_capacities(capacities)
        self.hidden_weights = [np.asarray(w, dtype=float) for w in hidden_weights]
        self.hidden_biases = [np.asarray(b, dtype=float) for b in hidden_biases]
        self.cutoffs = [float(t) for t in cutoffs]
        self.out_weights = np.asarray(out_weights, dtype=float)
        self.skip_weights = None if skip_weights is None else np.asarray(skip_weights, dtype=float)
        self._norm = 1.0 / np.asarray(self.capacities, dtype=float)
        self._table = None
        if validate:
            self._check_shapes()
            self.check_constraints()

    # -- structure ----------------------------------------------------------

    def _check_shapes(self):
        m = len(self.capacities)
        if not (len(self.hidden_weights) == len(self.hidden_biases) == len(self.cutoffs)):
            raise DimensionError("hidden weights, biases and cutoffs must align")
        if not self.hidden_weights:
            raise DomainError("need at least one hidden layer")
        prev = m
        for k, (w, b) in enumerate(zip(self.hidden_weights, self.hidden_biases)):
            if w.ndim != 2 or w.shape[1] != prev:
                raise DimensionError(f"hidden layer {k}: weight shape {w.shape}, expected (*, {prev})")
            if b.shape != (w.shape[0],):
                raise DimensionError(f"hidden layer {k}: bias shape {b.shape} vs weight {w.shape}")
            prev = w.shape[0]
        if self.out_weights.shape != (prev,):
            raise DimensionError(f"output weights shape {self.out_weights.shape}, expected ({prev},)")
        if self.skip_weights is not None and self.skip_weights.shape != (m,):
            raise DimensionError(f"skip weights shape {self.skip_weights.shape}, expected ({m},)")

    def check_constraints(self):
        for k, (w, b) in enumerate(zip(self.hidden_weights, self.hidden_biases)):
            if np.any(w < 0):
                raise DomainError(f"hidden layer {k} has negative weights")
            if np.any(b > 0):
                raise DomainError(f"hidden layer {k} has positive biases")
        if any(t <= 0 for t in self.cutoffs):
            raise DomainError("cutoffs must be > 0")
        if np.any(self.out_weights < 0):
            raise DomainError("output layer has negative weights")
        if self.skip_weights is not None and np.any(self.skip_weights < 0):
            raise DomainError("skip connection has negative weights")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (len(self.capacities),
                *(w.shape[0] for w in self.hidden_weights), 1)

    def copy(self) -> "MonotoneNet":
        return MonotoneNet(
            self.capacities,
            [w.copy() for w in self.hidden_weights],
            [b.copy() for b in self.hidden_biases],
            list(self.cutoffs),
            self.out_weights.copy(),
            None if self.skip_weights is None else self.skip_weights.copy(),
            validate=False,
        )

    def param_arrays(self):
        """(array, kind) pairs for every trainable tensor, in a fixed order."""
        out = []
        for w, b in zip(self.hidden_weights, self.hidden_biases):
            out.append((w, "weight"))
            out.append((b, "bias"))
        out.append((self.out_weights, "weight"))
        if self.skip_weights is not None:
            out.append((self.skip_weights, "weight"))
        return out

    def invalidate(self):
        self._table = None

    # -- evaluation ----------------------------------------------------------

    def forward(self, bundle) -> float:
        """Network output at one bundle (direct single-sample pass)."""
        x = domain.check_bundle(bundle, self.capacities)
        z = np.asarray(x, dtype=float) * self._norm
        z0 = z
        for w, b, t in zip(self.hidden_weights, self.hidden_biases, self.cutoffs):
            z = np.clip(w @ z + b, 0.0, t)
        y = float(self.out_weights @ z)
        if self.skip_weights is not None:
            y += float(self.skip_weights @ z0)
        return y

    def forward_batch(self, bundles: np.ndarray) -> np.ndarray:
        """Network outputs for every row of a bundle matrix."""
        z = bundles.astype(float).T * self._norm[:, None]
        z0 = z
        for w, b, t in zip(self.hidden_weights, self.hidden_biases, self.cutoffs):
            z = np.clip(w @ z + b[:, None], 0.0, t)
        y = self.out_weights @ z
        if self.skip_weights is not None:
            y = y + self.skip_weights @ z0
        return y

    def value_table(self, cap: int = domain.DEFAULT_SPACE_CAP) -> np.ndarray:
        """Outputs over the whole bundle space in rank order, cached.

        This is the canonical evaluation used by the oracles; it is rebuilt
        after every parameter mutation (see :meth:`invalidate`).
        """
        if self._table is None:
            bundles = domain.bundle_space(self.capacities, cap=cap)
            table = self.forward_batch(bundles)
            table.setflags(write=False)
            self._table = table
        return self._table

    def value(self, bundle) -> float:
        x = domain.check_bundle(bundle, self.capacities)
        if domain.space_size(self.capacities) <= domain.DEFAULT_SPACE_CAP:
            return float(self.value_table()[domain.rank_of(x, self.capacities)])
        return self.forward(x)

    # -- gradients ------------------------------------------------------------

    def grad_params(self, bundle):
        """Gradient of the output w.r.t. every trainable tensor at one bundle.

        At bReLU kinks the derivative takes the value from inside the linear
        band (right-derivative at 0, left-derivative at the cutoff), so the
        active mask is ``0 <= pre-activation <= t``.
        """
        x = domain.check_bundle(bundle, self.capacities)
        z = np.asarray(x, dtype=float) * self._norm
        z0 = z
        activations = [z]
        masks = []
        for w, b, t in zip(self.hidden_weights, self.hidden_biases, self.cutoffs):
            pre = w @ z + b
            masks.append((pre >= 0.0) & (pre <= t))
            z = np.clip(pre, 0.0, t)
            activations.append(z)
        grads = [None] * (2 * len(self.hidden_weights))
        d_out = activations[-1].copy()
        delta = self.out_weights * masks[-1]
        for k in range(len(self.hidden_weights) - 1, -1, -1):
            grads[2 * k] = np.outer(delta, activations[k])
            grads[2 * k + 1] = delta.copy()
            if k > 0:
                delta = (self.hidden_weights[k].T @ delta) * masks[k - 1]
        grads.append(d_out)
        if self.skip_weights is not None:
            grads.append(z0.copy())
        return grads

    # -- maintenance -----------------------------------------------------------

    def project_(self) -> "MonotoneNet":
        """Clamp parameters back onto the sign constraints, in place."""
        for w in self.hidden_weights:
            np.maximum(w, 0.0, out=w)
        for b in self.hidden_biases:
            np.minimum(b, 0.0, out=b)
        np.maximum(self.out_weights, 0.0, out=self.out_weights)
        if self.skip_weights is not None:
            np.maximum(self.skip_weights, 0.0, out=self.skip_weights)
        self.invalidate()
        return self


def project_params(net: MonotoneNet) -> MonotoneNet:
    """Restore the sign constraints after an unconstrained parameter step."""
    return net.project_()


def init(arch: Architecture, capacities, seed: int) -> MonotoneNet:
    """Seeded initialization satisfying the sign constraints.

    Weights ~ U(0, 2/fan_in) and biases ~ -U(0, 0.1 * cutoff) keep the
    pre-activations of normalized inputs inside the bReLU linear band.
    """
    caps = domain.check_capacities(capacities)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    dims = (len(caps), *arch.hidden_dims)
    weights, biases = [], []
    for fan_in, d in zip(dims, dims[1:]):
        weights.append(rng.uniform(0.0, 2.0 / fan_in, size=(d, fan_in)))
        biases.append(-rng.uniform(0.0, 0.1 * arch.cutoff, size=d))
    out = rng.uniform(0.0, 2.0 / dims[-1], size=dims[-1])
    skip = rng.uniform(0.0, 2.0 / len(caps), size=len(caps)) if arch.linear_skip else None
    return MonotoneNet(caps, weights, biases, [arch.cutoff] * len(weights), out, skip)


def construct_exact(table, capacities, cap: int = DEFAULT_EXACT_CAP) -> MonotoneNet:
    """Build a net that reproduces a monotone normalized table exactly.

    Bundles are sorted by value; the three hidden layers compute, for every
    prefix of the sorted order, the indicator "the input is dominated by no
    bundle in the prefix", and the output layer pays the sorted value
    increments for each indicator that fires.  All cutoffs are 1 and all
    integer comparisons hit the bReLU clamp exactly, so the reproduction is
    exact up to float rounding (<< 1e-9 at desk scale).
    """
    caps = domain.check_capacities(capacities)
    table = np.asarray(table, dtype=float)
    size = domain.space_size(caps)
    if size > cap:
        raise ResourceLimitError(f"exact construction over {size} bundles exceeds cap {cap}")
    if table.shape != (size,):
        raise DimensionError(f"table has shape {table.shape}, domain has {size} bundles")
    if table[0] != 0.0:
        raise DomainError("table must assign 0 to the empty bundle")
    if np.any(table < 0):
        raise DomainError("table values must be >= 0")
    _check_table_monotone(table, caps)

    m = len(caps)
    bundles = domain.bundle_space(caps)
    order = np.argsort(table, kind="stable")
    sorted_vals = table[order]
    sorted_bundles = bundles[order]

    k = size - 1  # indicators for prefixes 1..|X|-1
    w1 = np.tile(np.diag(np.asarray(caps, dtype=float)), (k, 1))
    b1 = -sorted_bundles[:k].astype(float).reshape(-1)
    w2 = np.kron(np.eye(k), np.ones(m))
    b2 = np.zeros(k)
    w3 = np.tril(np.ones((k, k)))
    b3 = -np.arange(k, dtype=float)
    out = np.diff(sorted_vals)
    return MonotoneNet(caps, [w1, w2, w3], [b1, b2, b3], [1.0, 1.0, 1.0], out)


# --- JSON document form -------------------------------------------------------

def net_to_dict(net: MonotoneNet) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "capacities": list(net.capacities),
        "layer_dims": list(net.layer_dims),
        "cutoffs": list(net.cutoffs),
        "hidden_weights": [w.reshape(-1).tolist() for w in net.hidden_weights],
        "hidden_biases": [b.tolist() for b in net.hidden_biases],
        "out_weights": net.out_weights.tolist(),
        "skip_weights": None if net.skip_weights is None else net.skip_weights.tolist(),
    }


def net_from_dict(doc: dict) -> MonotoneNet:
    caps = domain.check_capacities(doc["capacities"])
    dims = [int(d) for d in doc["layer_dims"]]
    if dims[0] != len(caps) or dims[-1] != 1:
        raise DimensionError(f"layer_dims {dims} inconsistent with m={len(caps)}")
    hidden = dims[1:-1]
    weights = []
    prev = dims[0]
    for d, flat in zip(hidden, doc["hidden_weights"]):
        weights.append(np.asarray(flat, dtype=float).reshape(d, prev))
        prev = d
    biases = [np.asarray(b, dtype=float) for b in doc["hidden_biases"]]
    skip = doc.get("skip_weights")
    return MonotoneNet(
        caps, weights, biases, [float(t) for t in doc["cutoffs"]],
        np.asarray(doc["out_weights"], dtype=float),
        None if skip is None else np.asarray(skip, dtype=float),
    )
