"""A small dense classifier with hand-derived backpropagation.

The network is a stack of fully connected layers described by
``(fan_in, fan_out, activation)`` triples, with all weights and biases kept
in one flat float64 vector so that snapshots, checkpoints, and subspace
projections are trivial. Heads are a single sigmoid unit (binary) or a
softmax row (k >= 2); hidden layers are relu or sigmoid. Gradients are exact
analytic derivatives of the mean cross-entropy, verified against central
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tensor import Rng, as_dense

__all__ = [
    "ModelState",
    "cross_entropy",
    "forward",
    "forward_batch",
    "gradient",
    "init_model",
    "mean_loss",
    "num_classes",
    "param_count",
    "predict_labels",
    "proba_matrix",
]

CLIP = 1e-12

_HIDDEN_ACTS = ("relu", "sigmoid")
_HEAD_ACTS = ("sigmoid", "softmax")


def param_count(layer_spec) -> int:
    return sum(f * o + o for f, o, _ in layer_spec)


@dataclass(frozen=True)
class ModelState:
    """Immutable network state: architecture, flat parameters, update count."""

    layer_spec: tuple
    params: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        spec = tuple((int(f), int(o), str(a)) for f, o, a in self.layer_spec)
        _validate_spec(spec)
        params = as_dense(self.params)
        if params.ndim != 1 or params.size != param_count(spec):
            raise ValueError(
                f"params length {params.size} does not match spec "
                f"(expected {param_count(spec)})"
            )
        object.__setattr__(self, "layer_spec", spec)
        object.__setattr__(self, "params", params)

    def with_params(self, params: np.ndarray, steps: int = 0) -> "ModelState":
        return replace(self, params=params, step_count=self.step_count + steps)


def _validate_spec(spec) -> None:
    if len(spec) == 0:
        raise ValueError("layer spec must not be empty")
    for f, o, a in spec:
        if f < 1 or o < 1:
            raise ValueError(f"layer dims must be positive, got ({f}, {o})")
    for f, o, a in spec[:-1]:
        if a not in _HIDDEN_ACTS:
            raise ValueError(f"hidden activation must be one of {_HIDDEN_ACTS}, got {a!r}")
    for (f1, o1, _), (f2, o2, _) in zip(spec, spec[1:]):
        if o1 != f2:
            raise ValueError(f"layer fan mismatch: {o1} feeds {f2}")
    f, o, a = spec[-1]
    if a not in _HEAD_ACTS:
        raise ValueError(f"head activation must be one of {_HEAD_ACTS}, got {a!r}")
    if a == "sigmoid" and o != 1:
        raise ValueError("sigmoid head requires a single output unit")
    if a == "softmax" and o < 2:
        raise ValueError("softmax head requires at least 2 classes")


def num_classes(model: ModelState) -> int:
    f, o, a = model.layer_spec[-1]
    return 2 if a == "sigmoid" else o


def init_model(layer_spec, seed: int) -> ModelState:
    """He-style fan-in-scaled uniform weights, zero biases, seed-deterministic."""
    spec = tuple((int(f), int(o), str(a)) for f, o, a in layer_spec)
    _validate_spec(spec)
    rng = Rng(seed)
    chunks = []
    for f, o, _ in spec:
        limit = np.sqrt(6.0 / f)
        chunks.append(rng.uniforms(-limit, limit, f * o))
        chunks.append(np.zeros(o))
    return ModelState(layer_spec=spec, params=np.concatenate(chunks), step_count=0)


def _unpack(model: ModelState):
    params = model.params
    offset = 0
    layers = []
    for f, o, a in model.layer_spec:
        W = params[offset : offset + f * o].reshape(f, o)
        offset += f * o
        b = params[offset : offset + o]
        offset += o
        layers.append((W, b, a))
    return layers


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(model: ModelState, X) -> np.ndarray:
    """Batched forward pass; rows of X are flattened inputs."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.layer_spec[0][0]:
        raise ValueError(
            f"input width {X.shape[1]} does not match first layer fan-in "
            f"{model.layer_spec[0][0]}"
        )
    A = X
    for W, b, act in _unpack(model):
        Z = A @ W + b
        if act == "relu":
            A = np.maximum(Z, 0.0)
        elif act == "sigmoid":
            A = _sigmoid(Z)
        else:
            A = _softmax(Z)
    return A


def forward(model: ModelState, x) -> np.ndarray:
    """Single-sample forward pass; returns the probability vector."""
    return forward_batch(model, np.asarray(x, dtype=np.float64).ravel())[0]


def logits_batch(model: ModelState, X) -> np.ndarray:
    """Pre-head activations (the head's linear outputs) for a batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    A = X
    layers = _unpack(model)
    for W, b, act in layers[:-1]:
        Z = A @ W + b
        A = np.maximum(Z, 0.0) if act == "relu" else _sigmoid(Z)
    W, b, _ = layers[-1]
    return A @ W + b


def proba_matrix(model: ModelState, X) -> np.ndarray:
    """(n, k) class probabilities; a sigmoid head expands to [1-p, p]."""
    out = forward_batch(model, X)
    if model.layer_spec[-1][2] == "sigmoid":
        p = out[:, 0]
        return np.column_stack([1.0 - p, p])
    return out


def predict_labels(model: ModelState, X) -> np.ndarray:
    return np.argmax(proba_matrix(model, X), axis=1)


def cross_entropy(y, y_hat) -> float:
    """Cross-entropy with predictions clipped to [1e-12, 1 - 1e-12].

    ``y_hat`` of length 1 (or scalar) is a Bernoulli head probability and
    ``y`` its binary target; otherwise ``y`` is a one-hot (or soft) target
    vector over the classes.
    """
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    p = np.clip(y_hat, CLIP, 1.0 - CLIP)
    if y_hat.size == 1:
        t = float(y[0])
        return float(-(t * np.log(p[0]) + (1.0 - t) * np.log(1.0 - p[0])))
    if y.size != y_hat.size:
        raise ValueError(f"target length {y.size} does not match prediction {y_hat.size}")
    return float(-(y * np.log(p)).sum())


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must be in [0, {k}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def mean_loss(model: ModelState, X, labels) -> float:
    """Mean cross-entropy of the model over a labeled batch."""
    P = forward_batch(model, X)
    labels = np.asarray(labels, dtype=int)
    P = np.clip(P, CLIP, 1.0 - CLIP)
    if model.layer_spec[-1][2] == "sigmoid":
        p = P[:, 0]
        t = labels.astype(np.float64)
        return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))
    Y = _one_hot(labels, model.layer_spec[-1][1])
    return float(-np.mean((Y * np.log(P)).sum(axis=1)))


def gradient(model: ModelState, X, labels) -> np.ndarray:
    """Exact gradient of the mean cross-entropy w.r.t. the flat parameters."""
    return loss_and_gradient(model, X, labels)[1]


def loss_and_gradient(model: ModelState, X, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its exact gradient, sharing one forward pass."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = np.asarray(labels, dtype=int)
    if X.shape[0] == 0:
        raise ValueError("gradient needs a nonempty batch")
    n = X.shape[0]
    layers = _unpack(model)

    acts = [X]
    zs = []
    A = X
    for W, b, act in layers:
        Z = A @ W + b
        zs.append(Z)
        if act == "relu":
            A = np.maximum(Z, 0.0)
        elif act == "sigmoid":
            A = _sigmoid(Z)
        else:
            A = _softmax(Z)
        acts.append(A)

    head_act = layers[-1][2]
    P = acts[-1]
    if head_act == "sigmoid":
        dZ = (P - labels.astype(np.float64)[:, None]) / n
    else:
        Y = _one_hot(labels, layers[-1][0].shape[1])
        dZ = (P - Y) / n

    grads = [None] * len(layers)
    for li in range(len(layers) - 1, -1, -1):
        W, b, act = layers[li]
        A_prev = acts[li]
        dW = A_prev.T @ dZ
        db = dZ.sum(axis=0)
        grads[li] = (dW, db)
        if li > 0:
            dA = dZ @ W.T
            prev_act = layers[li - 1][2]
            Zp = zs[li - 1]
            if prev_act == "relu":
                dZ = dA * (Zp > 0.0)
            else:
                S = _sigmoid(Zp)
                dZ = dA * S * (1.0 - S)

    return np.concatenate([np.concatenate([dW.ravel(), db]) for dW, db in grads])
