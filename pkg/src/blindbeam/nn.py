"""A small dense-network engine in float64 numpy.

Forward passes keep a cache of every layer's input, pre-activation and
output so that :func:`backward` can do exact reverse-mode differentiation.
Parameters are plain numpy arrays, updated in place by :func:`adam_step`.
Everything is batched over the leading axis; 1-D inputs are treated as a
batch of one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "softmax", "identity")
CHECKPOINT_VERSION = 1


@dataclass
class DenseLayer:
    weights: np.ndarray  # (d_out, d_in)
    bias: np.ndarray  # (d_out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"inconsistent layer shapes W{self.weights.shape} b{self.bias.shape}")

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def init(cls, d_in: int, d_out: int, activation: str, rng: np.random.Generator) -> "DenseLayer":
        """Uniform(-1/sqrt(d_in), 1/sqrt(d_in)) initialisation."""
        lim = 1.0 / np.sqrt(d_in)
        return cls(rng.uniform(-lim, lim, (d_out, d_in)), rng.uniform(-lim, lim, d_out), activation)

    @classmethod
    def zeros(cls, d_in: int, d_out: int, activation: str) -> "DenseLayer":
        return cls(np.zeros((d_out, d_in)), np.zeros(d_out), activation)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_vjp(s: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise ``J^T g`` with the full softmax Jacobian ``diag(s) - s s^T``."""
    return s * (g - np.sum(g * s, axis=-1, keepdims=True))


def activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "softmax":
        return softmax(z)
    return z


def activation_vjp(name: str, z: np.ndarray, y: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "relu":
        return g * (z > 0)
    if name == "tanh":
        return g * (1.0 - y * y)
    if name == "softmax":
        return softmax_vjp(y, g)
    return g


@dataclass
class Cache:
    layers: tuple
    entries: list = field(default_factory=list)  # (input, pre, post) per layer
    squeeze: bool = False


def _as_batch(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def forward(layers: Sequence[DenseLayer], x) -> tuple[np.ndarray, Cache]:
    """Run ``x_l = g(W_l x_{l-1} + b_l)`` through all layers."""
    h, squeeze = _as_batch(x)
    cache = Cache(tuple(id(l) for l in layers), squeeze=squeeze)
    for i, layer in enumerate(layers):
        if h.shape[1] != layer.d_in:
            raise ValueError(f"layer {i}: expected input width {layer.d_in}, got {h.shape[1]}")
        z = h @ layer.weights.T + layer.bias
        y = activate(z, layer.activation)
        cache.entries.append((h, z, y))
        h = y
    return (h[0] if squeeze else h), cache


def backward(layers: Sequence[DenseLayer], cache: Cache, grad_output,
             param_grads: bool = True) -> tuple[list, np.ndarray]:
    """Reverse-mode gradients.

    Returns ``([(dW_1, db_1), ...], grad_input)`` for the scalar whose
    gradient with respect to the network output is ``grad_output``.
    Gradients are summed over the batch. ``param_grads=False`` skips the
    parameter gradients (the list then holds ``None``).
    """
    if cache.layers != tuple(id(l) for l in layers) or len(cache.entries) != len(layers):
        raise ValueError("cache does not belong to these layers")
    g = np.asarray(grad_output, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.entries[-1][2].shape:
        raise ValueError(f"grad_output shape {g.shape} != output shape {cache.entries[-1][2].shape}")
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        h, z, y = cache.entries[i]
        gz = activation_vjp(layer.activation, z, y, g)
        if param_grads:
            grads[i] = (gz.T @ h, gz.sum(axis=0))
        g = gz @ layer.weights
    return grads, (g[0] if cache.squeeze else g)


def layer_params(layers: Sequence[DenseLayer]) -> list[np.ndarray]:
    out = []
    for layer in layers:
        out += [layer.weights, layer.bias]
    return out


def pack_params(arrays: Sequence[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Copy ``arrays`` into one contiguous buffer; return it and reshaped views into it, in order."""
    flat = np.concatenate([np.ravel(a) for a in arrays]) if len(arrays) else np.zeros(0)
    views, off = [], 0
    for a in arrays:
        views.append(flat[off:off + a.size].reshape(a.shape))
        off += a.size
    return flat, views


def concat_grads(grads: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(g) for g in grads])


def flatten_grads(grads) -> list[np.ndarray]:
    out = []
    for dw, db in grads:
        out += [dw, db]
    return out


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState, lr: float):
    """One bias-corrected Adam descent step, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ValueError("params, grads and optimiser state disagree in length")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step_count
    c2 = 1.0 - b2**state.step_count
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        denom = np.sqrt(v * (1.0 / c2))
        denom += state.epsilon
        np.divide(m, denom, out=denom)
        denom *= lr / c1
        p -= denom
    return params, state


def numeric_grads(loss: Callable[[], float], params: Sequence[np.ndarray], h: float = 1e-5,
                  n_samples: int | None = None, rng: np.random.Generator | None = None):
    """Central differences of ``loss()`` with respect to entries of ``params``.

    ``params`` are perturbed in place and restored. With ``n_samples`` set,
    only that many randomly chosen entries per array are differentiated;
    the returned index arrays say which.
    """
    rng = rng or np.random.default_rng(0)
    out = []
    for p in params:
        flat = p.reshape(-1)
        if n_samples is None or n_samples >= flat.size:
            idx = np.arange(flat.size)
        else:
            idx = rng.choice(flat.size, n_samples, replace=False)
        fd = np.empty(idx.size)
        for k, j in enumerate(idx):
            orig = flat[j]
            flat[j] = orig + h
            up = loss()
            flat[j] = orig - h
            down = loss()
            flat[j] = orig
            fd[k] = (up - down) / (2.0 * h)
        out.append((idx, fd))
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``; zero when both vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def compare_grads(analytic: Sequence[np.ndarray], numeric) -> float:
    """Largest per-array relative error over the sampled entries."""
    return max(relative_error(a.reshape(-1)[idx], fd) for a, (idx, fd) in zip(analytic, numeric))


def finite_diff_check(layers: Sequence[DenseLayer], x, h: float = 1e-5, n_samples: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Max relative error between backprop and central differences.

    The scalar being differentiated is a random weighted sum of the network
    outputs (a plain sum would be constant under a softmax output).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    rng = rng or np.random.default_rng(0)
    out, cache = forward(layers, x)
    w = rng.normal(size=out.shape)
    grads, _ = backward(layers, cache, w)
    params = layer_params(layers)
    fd = numeric_grads(lambda: float(np.sum(w * forward(layers, x)[0])), params, h, n_samples, rng)
    return compare_grads(flatten_grads(grads), fd)


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write a versioned ``.npz`` container; float64 arrays round-trip bit-exactly."""
    payload = {f"a/{k}": np.asarray(v) for k, v in arrays.items()}
    payload["meta"] = np.array(json.dumps({"version": CHECKPOINT_VERSION, **meta}))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        arrays = {k[2:]: data[k].copy() for k in data.files if k.startswith("a/")}
    return arrays, meta


def layers_to_arrays(prefix: str, layers: Sequence[DenseLayer]) -> tuple[dict, list]:
    arrays, acts = {}, []
    for i, layer in enumerate(layers):
        arrays[f"{prefix}/{i}/W"] = layer.weights
        arrays[f"{prefix}/{i}/b"] = layer.bias
        acts.append(layer.activation)
    return arrays, acts


def layers_from_arrays(prefix: str, arrays: dict, activations: Sequence[str]) -> list[DenseLayer]:
    return [DenseLayer(arrays[f"{prefix}/{i}/W"], arrays[f"{prefix}/{i}/b"], act)
            for i, act in enumerate(activations)]
