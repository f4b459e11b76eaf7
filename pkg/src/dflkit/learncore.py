"""Minimal differentiable building blocks: dense nets, softmax, Adam.

Explicit forward/backward contract, no autodiff graph. Shared by the
attention surrogate and the baseline forecasters. All math is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("identity", "relu", "tanh")


def apply_activation(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "identity":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {tag!r}")


def activation_grad(tag: str, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    """d(activation)/dz evaluated from preactivation z and output h."""
    if tag == "identity":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0.0).astype(float)
    if tag == "tanh":
        return 1.0 - h * h
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"


@dataclass
class DenseNet:
    """Plain stack of affine layers with elementwise activations."""

    layers: list[Layer]
    _cache: dict | None = field(default=None, repr=False, compare=False)

    @property
    def input_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for lay in self.layers:
            out.append(lay.w)
            out.append(lay.b)
        return out


def init_dense(dims: list[int], seed: int = 0, hidden_activation: str = "relu",
               output_activation: str = "identity") -> DenseNet:
    """Net with layer sizes dims[0] -> ... -> dims[-1].

    Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        act = output_activation if k == len(dims) - 2 else hidden_activation
        layers.append(Layer(w, b, act))
    return DenseNet(layers)


def check_net(net: DenseNet) -> None:
    """Dimension chaining + finite parameters."""
    for k, lay in enumerate(net.layers):
        if lay.activation not in ACTIVATIONS:
            raise ValueError(f"layer {k}: unknown activation {lay.activation!r}")
        if not (np.all(np.isfinite(lay.w)) and np.all(np.isfinite(lay.b))):
            raise ValueError(f"layer {k}: nonfinite parameters")
        if lay.b.shape != (lay.w.shape[0],):
            raise ValueError(f"layer {k}: bias shape {lay.b.shape} vs weight {lay.w.shape}")
        if k > 0 and lay.w.shape[1] != net.layers[k - 1].w.shape[0]:
            raise ValueError(f"layer {k}: input dim {lay.w.shape[1]} does not chain")


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Evaluate the net. x is (input_dim,) or a batch (n, input_dim).

    Caches intermediates on the net for the matching backward call.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.shape[1] != net.input_dim:
        raise ValueError(f"input dim {xb.shape[1]}, net expects {net.input_dim}")
    hs = [xb]
    zs = []
    h = xb
    for lay in net.layers:
        z = h @ lay.w.T + lay.b
        h = apply_activation(lay.activation, z)
        zs.append(z)
        hs.append(h)
    net._cache = {"hs": hs, "zs": zs, "single": single}
    return h[0] if single else h


def backward(net: DenseNet, upstream: np.ndarray):
    """Gradients of <upstream, forward(x)> w.r.t. parameters and x.

    Returns (grads, dx) with grads a flat list matching net.params()
    order (w0, b0, w1, b1, ...). Batched upstream sums gradients over
    the batch; dx keeps the batch shape.
    """
    if net._cache is None:
        raise ValueError("backward before forward")
    hs, zs, single = net._cache["hs"], net._cache["zs"], net._cache["single"]
    up = np.asarray(upstream, dtype=float)
    if single:
        up = up[None, :]
    if up.shape != (hs[0].shape[0], net.output_dim):
        raise ValueError(f"upstream shape {up.shape} does not match cached forward")
    grads = [None] * (2 * len(net.layers))
    delta = up
    for k in range(len(net.layers) - 1, -1, -1):
        lay = net.layers[k]
        delta = delta * activation_grad(lay.activation, zs[k], hs[k + 1])
        grads[2 * k] = delta.T @ hs[k]
        grads[2 * k + 1] = delta.sum(axis=0)
        delta = delta @ lay.w
    dx = delta[0] if single else delta
    return grads, dx


def softmax(u: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax along axis."""
    shifted = u - np.max(u, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(w: np.ndarray, upstream: np.ndarray, axis: int = -1) -> np.ndarray:
    """Jacobian-vector product du for w = softmax(u): w * (up - <w, up>)."""
    dot = np.sum(w * upstream, axis=axis, keepdims=True)
    return w * (upstream - dot)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


def adam_init(params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, lr: float | None = None):
    """One bias-corrected Adam update, in place on the param arrays.

    lr overrides state.lr for this step (used by annealing schedules).
    Returns (params, state).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    step_lr = state.lr if lr is None else lr
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=float)
        if not np.all(np.isfinite(g)):
            raise ValueError("nonfinite gradient in adam_step")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= step_lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def save_checkpoint(net: DenseNet, path: str, meta: dict | None = None) -> None:
    """JSON checkpoint: {layers: [{w: row-major, b, activation}], meta}."""
    obj = {
        "layers": [
            {"w": lay.w.tolist(), "b": lay.b.tolist(), "activation": lay.activation}
            for lay in net.layers
        ],
        "meta": dict(meta or {}),
    }
    obj["meta"].setdefault("dims", [net.input_dim] + [l.w.shape[0] for l in net.layers])
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_checkpoint(path: str) -> tuple[DenseNet, dict]:
    with open(path) as fh:
        obj = json.load(fh)
    layers = [
        Layer(np.asarray(d["w"], dtype=float), np.asarray(d["b"], dtype=float),
              d["activation"])
        for d in obj["layers"]
    ]
    net = DenseNet(layers)
    check_net(net)
    return net, obj.get("meta", {})
