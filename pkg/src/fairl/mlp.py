"""Small tanh multilayer perceptron with a linear scalar output.

Written directly in numpy so that the VR function and its parameter
gradient are explicit and cheap to check against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MlpParams:
    """Weights ``W[i]`` of shape ``(fan_in, fan_out)`` and biases ``b[i]``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"layer {i} input does not match previous output")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have exactly one unit")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def from_flat(self, vec) -> "MlpParams":
        """A new parameter set with this layout, filled from ``vec``."""
        vec = np.asarray(vec, dtype=np.float64)
        ws, bs, i = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[i : i + w.size].reshape(w.shape))
            i += w.size
            bs.append(vec[i : i + b.size].copy())
            i += b.size
        if i != vec.size:
            raise ValueError(f"expected {i} parameters, got {vec.size}")
        return MlpParams(ws, bs)

    def to_dict(self) -> dict:
        return {"layer_sizes": self.layer_sizes, "flat": self.flat().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpParams":
        return init_mlp(d["layer_sizes"], seed=0).from_flat(d["flat"])


def init_mlp(layer_sizes, seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    layer_sizes = [int(n) for n in layer_sizes]
    if len(layer_sizes) < 2 or layer_sizes[-1] != 1 or min(layer_sizes) < 1:
        raise ValueError(f"bad layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _activations(params: MlpParams, X: np.ndarray) -> list[np.ndarray]:
    if X.shape[-1] != params.layer_sizes[0]:
        raise ValueError(f"feature length {X.shape[-1]} != input size {params.layer_sizes[0]}")
    acts = [X]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        acts.append(np.tanh(acts[-1] @ w + b))
    return acts


def mlp_forward_batch(params: MlpParams, X) -> np.ndarray:
    """Outputs for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    h = _activations(params, X)[-1]
    return (h @ params.weights[-1] + params.biases[-1])[:, 0]


def mlp_forward(params: MlpParams, feature) -> float:
    feature = np.asarray(feature, dtype=np.float64)
    if feature.ndim != 1:
        raise ValueError("feature must be a vector")
    return float(mlp_forward_batch(params, feature[None])[0])


def mlp_vjp(params: MlpParams, X, g) -> MlpParams:
    """``sum_i g[i] * d out(X[i]) / d params`` by reverse-mode accumulation."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    acts = _activations(params, X)
    delta = np.asarray(g, dtype=np.float64).reshape(-1, 1)
    gw: list[np.ndarray] = [None] * len(params.weights)
    gb: list[np.ndarray] = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ params.weights[i].T) * (1.0 - acts[i] ** 2)
    return MlpParams(gw, gb)


def mlp_param_gradient(params: MlpParams, feature) -> MlpParams:
    """Gradient of the scalar output at one feature vector."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.ndim != 1:
        raise ValueError("feature must be a vector")
    return mlp_vjp(params, feature[None], [1.0])
