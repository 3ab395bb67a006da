"""Squared-exponential and deep kernels, plus the MLP feature map used by DKL.

A deep kernel evaluates the squared-exponential kernel on the outputs of a
feed-forward network ``psi``::

    k_dkl(x, x') = k_se(psi(x), psi(x'))

The network is trained separately (``train_feature_map``) as a regression
model of the unknown function and then frozen.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import erf

from .errors import InputError, TrainingDivergenceError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("gelu", "tanh")

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(z):
    """Exact GeLU, ``z * Phi(z)``."""
    return 0.5 * z * (1.0 + erf(z * _INV_SQRT2))


def gelu_grad(z):
    return 0.5 * (1.0 + erf(z * _INV_SQRT2)) + z * _INV_SQRT2PI * np.exp(-0.5 * z * z)


def tanh_grad(z):
    t = np.tanh(z)
    return 1.0 - t * t


_ACT = {"gelu": (gelu, gelu_grad), "tanh": (np.tanh, tanh_grad)}


# ---------------------------------------------------------------------------
# Feature map
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Fully connected network ``R^d -> R^s``.

    Hidden layers use ``activation``; the output layer is linear. ``weights[i]``
    has shape ``(n_out, n_in)``.
    """

    weights: tuple
    biases: tuple
    activation: str = "gelu"
    seed: int | None = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.weights) == 0 or len(self.weights) != len(self.biases):
            raise InputError("need at least one layer and one bias vector per layer")
        ws = tuple(np.array(w, dtype=float, copy=True) for w in self.weights)
        bs = tuple(np.array(b, dtype=float, copy=True).reshape(-1) for b in self.biases)
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape[0] != w.shape[0]:
                raise InputError(f"layer {i}: weight {w.shape} and bias {b.shape} do not match")
            if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
                raise InputError(f"layer {i} expects {w.shape[1]} inputs, previous layer gives {ws[i - 1].shape[0]}")
            w.flags.writeable = False
            b.flags.writeable = False
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @classmethod
    def init(cls, layers, activation="gelu", seed=0):
        """Seeded initialization, uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
        layers = [int(n) for n in layers]
        if len(layers) < 2 or min(layers) < 1:
            raise InputError(f"invalid layer sizes {layers}")
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for n_in, n_out in zip(layers[:-1], layers[1:]):
            scale = 1.0 / math.sqrt(n_in)
            ws.append(rng.uniform(-scale, scale, size=(n_out, n_in)))
            bs.append(rng.uniform(-scale, scale, size=n_out))
        return cls(tuple(ws), tuple(bs), activation, seed)

    @property
    def layers(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0]

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def forward(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.input_dim:
            raise InputError(f"feature map expects dimension {self.input_dim}, got {X.shape[1]}")
        act = _ACT[self.activation][0]
        h = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = act(h)
        return h[0] if single else h

    def with_params(self, weights, biases):
        return FeatureMap(tuple(weights), tuple(biases), self.activation, self.seed)

    def to_dict(self):
        return {
            "layers": self.layers,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activation": self.activation,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc):
        layers = [int(n) for n in doc["layers"]]
        ws = [np.asarray(w, dtype=float).reshape(n_out, n_in)
              for w, n_in, n_out in zip(doc["weights"], layers[:-1], layers[1:])]
        return cls(tuple(ws), tuple(np.asarray(b, dtype=float) for b in doc["biases"]),
                   doc.get("activation", "gelu"), doc.get("seed"))

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def feature_forward(fmap, x):
    return fmap.forward(x)


def mse_loss_and_grad(fmap, X, Y):
    """Mean squared error of ``fmap`` on ``(X, Y)`` and its gradients.

    Returns ``(loss, grad_weights, grad_biases)`` with gradients in the same
    layout as ``fmap.weights`` / ``fmap.biases``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    act, dact = _ACT[fmap.activation]
    last = len(fmap.weights) - 1
    pre, outs = [], [X]
    h = X
    for i, (w, b) in enumerate(zip(fmap.weights, fmap.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = act(z) if i < last else z
        outs.append(h)
    diff = h - Y
    loss = float(np.mean(diff * diff))
    delta = 2.0 * diff / diff.size
    gw = [None] * len(fmap.weights)
    gb = [None] * len(fmap.weights)
    for i in range(last, -1, -1):
        gw[i] = delta.T @ outs[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ fmap.weights[i]) * dact(pre[i - 1])
    return loss, gw, gb


def train_feature_map(fmap, X, Y, epochs=2000, batch_fraction=0.02, step_size=1e-3, seed=0):
    """Fit ``fmap`` to ``(X, Y)`` by plain mini-batch SGD on the squared error.

    Each epoch is one shuffled pass over the data in batches of
    ``ceil(batch_fraction * n)`` samples. The returned map holds the weights
    with the lowest full-data loss seen, so the final loss never exceeds the
    initial one. Deterministic given ``seed``.
    """
    if not 0.0 < batch_fraction <= 1.0:
        raise InputError(f"batch_fraction must be in (0, 1], got {batch_fraction}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
    if Y.shape[1] != fmap.output_dim:
        raise InputError(f"targets have dimension {Y.shape[1]}, feature map outputs {fmap.output_dim}")
    if X.shape[1] != fmap.input_dim:
        raise InputError(f"inputs have dimension {X.shape[1]}, feature map expects {fmap.input_dim}")
    if epochs <= 0:
        return fmap

    batch = max(1, math.ceil(batch_fraction * X.shape[0]))
    rng = np.random.default_rng(seed)
    ws = [w.copy() for w in fmap.weights]
    bs = [b.copy() for b in fmap.biases]
    best_loss = mse_loss_and_grad(fmap, X, Y)[0]
    best = ([w.copy() for w in ws], [b.copy() for b in bs])
    # divergence is reported through TrainingDivergenceError, not numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        best = _sgd(X, Y, ws, bs, fmap.activation, epochs, batch, step_size, rng, best_loss, best)
    return FeatureMap(tuple(best[0]), tuple(best[1]), fmap.activation, fmap.seed)


def _sgd(X, Y, ws, bs, activation, epochs, batch, step_size, rng, best_loss, best):
    n = X.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            # FeatureMap stores read-only copies, so build views over the live arrays.
            cur = _unchecked_map(ws, bs, activation)
            loss, gw, gb = mse_loss_and_grad(cur, X[idx], Y[idx])
            if not math.isfinite(loss):
                raise TrainingDivergenceError(epoch, loss)
            for i in range(len(ws)):
                ws[i] -= step_size * gw[i]
                bs[i] -= step_size * gb[i]
        full = mse_loss_and_grad(_unchecked_map(ws, bs, activation), X, Y)[0]
        if not math.isfinite(full):
            raise TrainingDivergenceError(epoch, full)
        if full < best_loss:
            best_loss = full
            best = ([w.copy() for w in ws], [b.copy() for b in bs])
        if epoch % 500 == 0:
            logger.debug("epoch %d loss %.3e", epoch, full)
    return best


class _unchecked_map:
    """Lightweight stand-in for FeatureMap during training (no copies)."""

    def __init__(self, weights, biases, activation):
        self.weights = weights
        self.biases = biases
        self.activation = activation


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Squared-exponential kernel, optionally composed with a feature map.

    ``k(x, x') = signal * exp(-|x - x'|^2 / (2 lengthscale^2))``, evaluated on
    ``feature_map(x)`` when a feature map is present (the DKL variant).
    ``lengthscale`` may be a scalar or one value per (feature) dimension.
    ``squared_distance=False`` selects the unsquared-norm variant, kept only
    for comparison.
    """

    lengthscale: float | np.ndarray = 1.0
    signal: float = 1.0
    feature_map: FeatureMap | None = None
    squared_distance: bool = True
    _ls: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscale, dtype=float))
        if ls.ndim != 1 or np.any(~np.isfinite(ls)) or np.any(ls <= 0):
            raise InputError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (math.isfinite(self.signal) and self.signal >= 0):
            raise InputError(f"signal amplitude must be >= 0, got {self.signal}")
        if not self.squared_distance and ls.size != 1:
            raise InputError("the unsquared-distance variant takes a scalar lengthscale")
        object.__setattr__(self, "_ls", ls)

    @property
    def variant(self):
        return "SE" if self.feature_map is None else "DKL"

    @property
    def input_dim(self):
        """Expected input dimension, or None when any dimension is accepted."""
        if self.feature_map is not None:
            return self.feature_map.input_dim
        return None if self._ls.size == 1 else self._ls.size

    def features(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = self.input_dim
        if d is not None and X.shape[1] != d:
            raise InputError(f"kernel expects dimension {d}, got {X.shape[1]}")
        if self.feature_map is not None:
            X = self.feature_map.forward(X)
        if self._ls.size > 1 and X.shape[1] != self._ls.size:
            raise InputError(f"lengthscale has {self._ls.size} entries, features have {X.shape[1]}")
        return X

    def _se(self, F1, F2):
        d2 = cdist(F1 / self._ls, F2 / self._ls, "sqeuclidean")
        if self.squared_distance:
            return self.signal * np.exp(-0.5 * d2)
        # exp(-|x - x'| / (2 l^2)), comparison only
        return self.signal * np.exp(-cdist(F1, F2) / (2.0 * self._ls[0] ** 2))

    def matrix(self, X1, X2=None):
        F1 = self.features(X1)
        F2 = F1 if X2 is None else self.features(X2)
        if F1.shape[1] != F2.shape[1]:
            raise InputError(f"dimension mismatch: {F1.shape[1]} vs {F2.shape[1]}")
        return self._se(F1, F2)

    def diag(self, X):
        n = np.atleast_2d(np.asarray(X, dtype=float)).shape[0]
        return np.full(n, float(self.signal))

    def to_dict(self):
        doc = {
            "type": "dkl" if self.feature_map is not None else "se",
            "lengthscale": self._ls.tolist() if self._ls.size > 1 else float(self._ls[0]),
            "signal": float(self.signal),
            "squared": bool(self.squared_distance),
        }
        if self.feature_map is not None:
            doc["feature_map"] = self.feature_map.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc):
        fm = doc.get("feature_map")
        return cls(
            lengthscale=doc.get("lengthscale", 1.0),
            signal=doc.get("signal", 1.0),
            feature_map=FeatureMap.from_dict(fm) if fm is not None else None,
            squared_distance=doc.get("squared", True),
        )


def kernel_matrix(spec, X1, X2=None):
    """Gram matrix with entries ``k(X1[i], X2[j])``."""
    return spec.matrix(X1, X2)


def kernel_eval(spec, x, x2):
    x = np.asarray(x, dtype=float).reshape(1, -1)
    x2 = np.asarray(x2, dtype=float).reshape(1, -1)
    if x.shape[1] != x2.shape[1]:
        raise InputError(f"dimension mismatch: {x.shape[1]} vs {x2.shape[1]}")
    return float(spec.matrix(x, x2)[0, 0])
