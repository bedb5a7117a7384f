"""Layers, sequential networks, losses, the Adam optimizer and model files.

A Network is an ordered stack of layers with explicit parameter arrays; the
whole thing is plain numpy so a saved model reloads bit-exactly. Training is
float32 by default, gradient checks build float64 models.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .util import array_state_hash, softmax_np


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss turns non-finite."""


def he_uniform(rng: np.random.Generator, fan_in: int, shape, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    kind = "?"

    def forward(self, x: Tensor, training: bool) -> Tensor:
        raise NotImplementedError

    def params(self) -> list[Tensor]:
        return []

    def state(self) -> dict[str, np.ndarray]:
        """Parameter and buffer arrays, keyed for serialization."""
        return {}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, arr in self.state().items():
            loaded = state[name]
            if loaded.shape != arr.shape:
                raise ValueError(f"{self.kind}: stored {name} shape {loaded.shape} != {arr.shape}")
        for name in self.state():
            self._set_state(name, state[name])

    def _set_state(self, name: str, arr: np.ndarray) -> None:
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": self.kind}


class Conv1d(Layer):
    kind = "conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 padding: str = "same", rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if kernel_size < 1 or in_channels < 1 or out_channels < 1:
            raise ValueError("conv1d hyperparameters must be >= 1")
        if padding not in ("same", "valid"):
            raise ValueError(f"unknown padding mode {padding!r}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        rng = rng or np.random.default_rng(0)
        self.w = Tensor(he_uniform(rng, in_channels * kernel_size,
                                   (out_channels, in_channels, kernel_size), dtype),
                        requires_grad=True)
        self.b = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def forward(self, x, training):
        return ad.conv1d(x, self.w, self.b, self.padding)

    def params(self):
        return [self.w, self.b]

    def state(self):
        return {"w": self.w.data, "b": self.b.data}

    def _set_state(self, name, arr):
        getattr(self, name).data = arr.copy()

    def spec(self):
        return {"kind": self.kind, "in_channels": self.in_channels,
                "out_channels": self.out_channels, "kernel_size": self.kernel_size,
                "padding": self.padding}


class BatchNorm1d(Layer):
    """Per-channel normalization over (batch, time) with 0.9-momentum running stats."""

    kind = "batchnorm"

    def __init__(self, num_features: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float32):
        if num_features < 1:
            raise ValueError("batchnorm needs num_features >= 1")
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)

    def forward(self, x, training):
        if x.data.ndim != 3:
            raise ValueError(f"batchnorm expects [B, C, L] input, got {x.data.shape}")
        if training:
            mu = ad.tmean(x, axis=(0, 2), keepdims=True)
            centered = x - mu
            var = ad.tmean(centered * centered, axis=(0, 2), keepdims=True)
            m = self.momentum
            self.running_mean = (m * self.running_mean
                                 + (1 - m) * mu.data.reshape(-1)).astype(self.running_mean.dtype)
            self.running_var = (m * self.running_var
                                + (1 - m) * var.data.reshape(-1)).astype(self.running_var.dtype)
        else:
            mu = Tensor(self.running_mean.reshape(1, -1, 1))
            var = Tensor(self.running_var.reshape(1, -1, 1))
            centered = x - mu
        inv_std = ad.pow_const(var + self.eps, -0.5)
        x_hat = centered * inv_std
        gamma = ad.reshape(self.gamma, (1, self.num_features, 1))
        beta = ad.reshape(self.beta, (1, self.num_features, 1))
        return gamma * x_hat + beta

    def params(self):
        return [self.gamma, self.beta]

    def state(self):
        return {"gamma": self.gamma.data, "beta": self.beta.data,
                "running_mean": self.running_mean, "running_var": self.running_var}

    def _set_state(self, name, arr):
        if name in ("gamma", "beta"):
            getattr(self, name).data = arr.copy()
        else:
            setattr(self, name, arr.copy())

    def spec(self):
        return {"kind": self.kind, "num_features": self.num_features,
                "momentum": self.momentum, "eps": self.eps}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training):
        return ad.relu(x)


class MaxPool1d(Layer):
    kind = "maxpool1d"

    def __init__(self, pool_size: int = 2, stride: int | None = None):
        if pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        self.pool_size = pool_size
        self.stride = stride if stride is not None else pool_size

    def forward(self, x, training):
        return ad.maxpool1d(x, self.pool_size, self.stride)

    def spec(self):
        return {"kind": self.kind, "pool_size": self.pool_size, "stride": self.stride}


class GlobalAvgPool1d(Layer):
    kind = "globalavgpool1d"

    def forward(self, x, training):
        return ad.tmean(x, axis=2)


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training):
        return ad.reshape(x, (x.data.shape[0], -1))


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features: int, units: int, rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if units < 1 or in_features < 1:
            raise ValueError("dense hyperparameters must be >= 1")
        self.in_features = in_features
        self.units = units
        rng = rng or np.random.default_rng(0)
        self.w = Tensor(he_uniform(rng, in_features, (in_features, units), dtype),
                        requires_grad=True)
        self.b = Tensor(np.zeros(units, dtype=dtype), requires_grad=True)

    def forward(self, x, training):
        if x.data.ndim != 2:
            raise ValueError(f"dense expects [B, F] input, got {x.data.shape}")
        if x.data.shape[1] != self.in_features:
            raise ValueError(f"dense expects {self.in_features} features, got {x.data.shape[1]}")
        return ad.matmul(x, self.w) + self.b

    def params(self):
        return [self.w, self.b]

    def state(self):
        return {"w": self.w.data, "b": self.b.data}

    def _set_state(self, name, arr):
        getattr(self, name).data = arr.copy()

    def spec(self):
        return {"kind": self.kind, "in_features": self.in_features, "units": self.units}


class Concat(Layer):
    """Joins a tuple of [B, F_i] inputs along the feature axis; must come first."""

    kind = "concat"

    def forward(self, x, training):
        if not isinstance(x, (tuple, list)):
            raise ValueError("concat layer expects a tuple of inputs")
        return ad.concat(list(x), axis=1)


_LAYER_KINDS = {cls.kind: cls for cls in
                (Conv1d, BatchNorm1d, ReLU, MaxPool1d, GlobalAvgPool1d, Flatten, Dense, Concat)}


class Network:
    """An ordered layer stack plus its seed and per-epoch training log."""

    def __init__(self, layers: list[Layer], rng_seed: int, architecture: str | None = None):
        self.layers = list(layers)
        self.rng_seed = rng_seed
        self.architecture = architecture
        self.training_log: list[dict] = []

    def forward(self, x, training: bool = False) -> Tensor:
        h = x
        for i, layer in enumerate(self.layers):
            try:
                h = layer.forward(h, training)
            except ValueError as exc:
                raise ValueError(f"layer {i} ({layer.kind}): {exc}") from None
        return h

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def set_requires_grad(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_arrays(self) -> list[np.ndarray]:
        return [arr for layer in self.layers for arr in layer.state().values()]

    def state_hash(self) -> str:
        return array_state_hash(self.state_arrays())


def predict(model: Network, x: np.ndarray, temperature: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Inference-mode logits and temperature-scaled softmax probabilities."""
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    logits = model.forward(_as_input(x), training=False).data
    return logits, softmax_np(logits, temperature=temperature, axis=1)


def _as_input(x) -> Tensor | tuple:
    if isinstance(x, (tuple, list)):
        return tuple(v if isinstance(v, Tensor) else Tensor(np.asarray(v)) for v in x)
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def input_gradient(model: Network, x: np.ndarray, target_class: int) -> np.ndarray:
    """Gradient of the softmax probability of ``target_class`` w.r.t. the input.

    Runs in inference mode, so per-sample gradients are independent of the
    rest of the batch. Output has the same shape as ``x``.
    """
    grad, _ = input_gradient_with_probs(model, x, target_class)
    return grad


def input_gradient_with_probs(model: Network, x: np.ndarray,
                              target_class: int) -> tuple[np.ndarray, np.ndarray]:
    """One tracked forward pass returning both the input gradient and the probabilities."""
    xt = Tensor(np.asarray(x), requires_grad=True)
    logits = model.forward(xt, training=False)
    num_classes = logits.data.shape[1]
    if not 0 <= target_class < num_classes:
        raise ValueError(f"target_class {target_class} out of range for {num_classes} classes")
    probs = ad.softmax(logits, axis=1)
    mask = np.zeros(num_classes, dtype=logits.data.dtype)
    mask[target_class] = 1
    f_t = ad.tsum(probs * Tensor(mask))
    f_t.backward()
    return xt.grad.copy(), probs.data.copy()


def cross_entropy(p_target, q_pred) -> Tensor:
    """-sum(p * log q) with q clamped at 1e-12; batched inputs average over rows."""
    q = q_pred if isinstance(q_pred, Tensor) else Tensor(np.asarray(q_pred, dtype=np.float64))
    p = np.asarray(p_target.data if isinstance(p_target, Tensor) else p_target, dtype=q.dtype)
    if p.shape != q.data.shape:
        raise ValueError(f"distribution shapes differ: {p.shape} vs {q.data.shape}")
    logq = ad.log(ad.clamp_min(q, 1e-12))
    total = ad.tsum(Tensor(p) * logq)
    rows = p.shape[0] if p.ndim == 2 else 1
    return total * (-1.0 / rows)


def l2(a, b) -> Tensor:
    """Mean squared element difference."""
    at = a if isinstance(a, Tensor) else Tensor(np.asarray(a))
    bt = b if isinstance(b, Tensor) else Tensor(np.asarray(b, dtype=at.dtype))
    if at.data.shape != bt.data.shape:
        raise ValueError(f"shapes differ: {at.data.shape} vs {bt.data.shape}")
    d = at - bt
    return ad.tmean(d * d)


class Adam:
    """Adaptive moment estimation with the standard decay constants."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ValueError("learning rate must be >= 0")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p.data = p.data - (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)


def train_step(model: Network, batch, loss_fn, optimizer: Adam) -> float:
    """One optimization step; aborts with diagnostics on a non-finite loss."""
    optimizer.zero_grad()
    out = model.forward(_as_input(batch), training=True)
    loss = loss_fn(out)
    value = float(loss.data)
    if not np.isfinite(value):
        raise TrainingDivergedError(
            f"non-finite loss {value} at step {optimizer.t + 1} "
            f"(architecture={model.architecture}, lr={optimizer.lr})")
    loss.backward()
    optimizer.step()
    return value


def save_model(model: Network, path: str | os.PathLike) -> None:
    """Versioned npz file: layer specs as JSON, arrays stored losslessly."""
    meta = {
        "format_version": 1,
        "architecture": model.architecture,
        "rng_seed": model.rng_seed,
        "layers": [layer.spec() for layer in model.layers],
        "training_log": model.training_log,
    }
    arrays = {}
    for i, layer in enumerate(model.layers):
        for name, arr in layer.state().items():
            arrays[f"layer{i}.{name}"] = arr
    meta_bytes = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, __meta__=meta_bytes, **arrays)


def load_model(path: str | os.PathLike) -> Network:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format_version") != 1:
            raise ValueError(f"unsupported model format {meta.get('format_version')!r}")
        layers = []
        for i, spec in enumerate(meta["layers"]):
            layer = layer_from_spec(spec)
            state = {}
            for name in layer.state():
                state[name] = data[f"layer{i}.{name}"]
            if state:
                layer.load_state(state)
            layers.append(layer)
    model = Network(layers, rng_seed=meta["rng_seed"], architecture=meta["architecture"])
    model.training_log = meta["training_log"]
    return model


def layer_from_spec(spec: dict) -> Layer:
    kind = spec["kind"]
    if kind not in _LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    return _LAYER_KINDS[kind](**kwargs)
