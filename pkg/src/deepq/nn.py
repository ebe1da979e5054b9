"""Q-network math: convolution and dense layers with hand-written backward
passes, parameter initialization, RMSProp, and a finite-difference gradient
oracle.

Tensors are plain numpy arrays. Parameters are held by name in a dict so the
optimizer, the checkpoint writer and the gradient checker can walk them in a
fixed order without knowing the architecture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, ShapeError, TrainingError

PARAM_ORDER = (
    "conv1_w", "conv1_b",
    "conv2_w", "conv2_b",
    "fc1_w", "fc1_b",
    "out_w", "out_b",
)


def conv_output_size(size: int, kernel: int, stride: int) -> int:
    """Spatial extent of a valid (unpadded) convolution."""
    if kernel > size:
        raise ShapeError(f"kernel {kernel} larger than input extent {size}")
    return (size - kernel) // stride + 1


@dataclass(frozen=True)
class ConvLayer:
    channels: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class Geometry:
    """Layer sizes of the two-conv, one-hidden-layer Q-network."""

    in_channels: int
    height: int
    width: int
    conv1: ConvLayer
    conv2: ConvLayer
    hidden: int
    num_actions: int

    def validate(self) -> "Geometry":
        problems = []
        for name in ("in_channels", "height", "width", "hidden"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        for name in ("conv1", "conv2"):
            layer = getattr(self, name)
            if min(layer.channels, layer.kernel, layer.stride) < 1:
                problems.append(f"{name} channels/kernel/stride must be positive")
        if self.num_actions < 2:
            problems.append("num_actions must be at least 2")
        if problems:
            raise ConfigError(problems)
        try:
            self.conv2_shape
        except ShapeError as exc:
            raise ConfigError(f"layer geometry does not chain: {exc}") from None
        return self

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (self.in_channels, self.height, self.width)

    @property
    def conv1_shape(self) -> tuple[int, int, int]:
        c = self.conv1
        return (c.channels,
                conv_output_size(self.height, c.kernel, c.stride),
                conv_output_size(self.width, c.kernel, c.stride))

    @property
    def conv2_shape(self) -> tuple[int, int, int]:
        _, h, w = self.conv1_shape
        c = self.conv2
        return (c.channels,
                conv_output_size(h, c.kernel, c.stride),
                conv_output_size(w, c.kernel, c.stride))

    @property
    def flat_size(self) -> int:
        return math.prod(self.conv2_shape)

    @property
    def covered_extent(self) -> tuple[int, int]:
        """(rows, cols) bounding the input pixels that reach the output. With
        valid convolutions a stride that does not divide evenly drops the
        trailing rows/columns; pixels beyond this extent never affect Q."""
        c1, c2 = self.conv1, self.conv2
        _, h2, w2 = self.conv2_shape
        return tuple(((n - 1) * c2.stride + c2.kernel - 1) * c1.stride + c1.kernel for n in (h2, w2))

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        c1, c2 = self.conv1, self.conv2
        return {
            "conv1_w": (c1.channels, self.in_channels, c1.kernel, c1.kernel),
            "conv1_b": (c1.channels,),
            "conv2_w": (c2.channels, c1.channels, c2.kernel, c2.kernel),
            "conv2_b": (c2.channels,),
            "fc1_w": (self.hidden, self.flat_size),
            "fc1_b": (self.hidden,),
            "out_w": (self.num_actions, self.hidden),
            "out_b": (self.num_actions,),
        }

    def as_ints(self) -> tuple[int, ...]:
        c1, c2 = self.conv1, self.conv2
        return (self.in_channels, self.height, self.width,
                c1.channels, c1.kernel, c1.stride,
                c2.channels, c2.kernel, c2.stride,
                self.hidden, self.num_actions)

    @classmethod
    def from_ints(cls, values) -> "Geometry":
        v = [int(x) for x in values]
        return cls(v[0], v[1], v[2], ConvLayer(v[3], v[4], v[5]),
                   ConvLayer(v[6], v[7], v[8]), v[9], v[10])


# 84x84x4 input, 16 8x8/4, 32 4x4/2, 256 hidden; action count varies per game.
ATARI_GEOMETRY = Geometry(4, 84, 84, ConvLayer(16, 8, 4), ConvLayer(32, 4, 2), 256, 4)
# Catch frames are 24x24, but these strides only reach 23 rows/columns; the
# Catch profile resamples frames to 23x23 so every pixel is seen.
CATCH_GEOMETRY = Geometry(4, 23, 23, ConvLayer(8, 3, 1), ConvLayer(16, 3, 2), 64, 3)
GRADCHECK_GEOMETRY = Geometry(2, 8, 8, ConvLayer(2, 3, 1), ConvLayer(1, 2, 1), 8, 3)


@dataclass(frozen=True, eq=False)
class QNetParams:
    geometry: Geometry
    tensors: dict

    @property
    def num_actions(self) -> int:
        return self.geometry.num_actions

    @property
    def dtype(self):
        return self.tensors["conv1_w"].dtype

    def forward(self, batch):
        return qnet_forward(self, batch)

    def loss_and_grad(self, batch, actions, targets):
        return qnet_backward(self, batch, actions, targets)

    def replace(self, tensors: dict) -> "QNetParams":
        return QNetParams(self.geometry, tensors)

    def astype(self, dtype) -> "QNetParams":
        return self.replace({k: v.astype(dtype) for k, v in self.tensors.items()})


def _float32_bound(bound: float) -> np.float32:
    b = np.float32(bound)
    return np.nextafter(b, np.float32(0)) if b > bound else b


def init_params(geometry: Geometry, seed: int, dtype=np.float32) -> QNetParams:
    """Uniform weights in +-1/sqrt(fan_in) per layer, zero biases."""
    geometry.validate()
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in geometry.param_shapes().items():
        if name.endswith("_b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
            continue
        bound = 1.0 / math.sqrt(math.prod(shape[1:]))
        if np.dtype(dtype) == np.float32:
            bound = float(_float32_bound(bound))
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return QNetParams(geometry, tensors)


def relu(x):
    return np.maximum(x, 0)


def _im2col(x, kernel, stride):
    # (B, C, H, W) -> (B, C*k*k, outH*outW), filled one kernel offset at a time
    b, c, h, w = x.shape
    out_h = conv_output_size(h, kernel, stride)
    out_w = conv_output_size(w, kernel, stride)
    h_end, w_end = stride * (out_h - 1) + 1, stride * (out_w - 1) + 1
    cols = np.empty((b, c, kernel, kernel, out_h, out_w), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            cols[:, :, i, j] = x[:, :, i:i + h_end:stride, j:j + w_end:stride]
    return cols.reshape(b, c * kernel * kernel, out_h * out_w), (out_h, out_w)


def _col2im(dcols, x_shape, kernel, stride, out_hw):
    b, c, h, w = x_shape
    out_h, out_w = out_hw
    h_end, w_end = stride * (out_h - 1) + 1, stride * (out_w - 1) + 1
    dcols = dcols.reshape(b, c, kernel, kernel, out_h, out_w)
    dx = np.zeros(x_shape, dtype=dcols.dtype)
    for i in range(kernel):
        for j in range(kernel):
            dx[:, :, i:i + h_end:stride, j:j + w_end:stride] += dcols[:, :, i, j]
    return dx


def _conv(x, filters, bias, stride):
    out_c, in_c, k, k2 = filters.shape
    if x.ndim != 4 or x.shape[1] != in_c:
        raise ShapeError(f"expected input with {in_c} channels, got shape {x.shape}")
    if k != k2 or k > x.shape[2] or k > x.shape[3]:
        raise ShapeError(f"kernel {k}x{k2} does not fit input {x.shape[2:]}")
    cols, out_hw = _im2col(x, k, stride)
    out = filters.reshape(out_c, -1) @ cols + bias[:, None]
    return out.reshape(len(x), out_c, *out_hw), cols


def conv2d_forward(x, filters, bias, stride: int):
    """Valid 2-d convolution (cross-correlation) of ``x`` with ``filters``.

    ``x`` is [C, H, W] or a batch [B, C, H, W]; ``filters`` is [O, C, k, k].
    """
    if stride < 1:
        raise ShapeError("stride must be positive")
    x = np.asarray(x)
    single = x.ndim == 3
    out, _ = _conv(x[None] if single else x, filters, bias, stride)
    return out[0] if single else out


def _conv_backward(grad_out, x_shape, cols, filters, stride, need_input_grad):
    b, out_c = grad_out.shape[:2]
    out_hw = grad_out.shape[2:]
    g = grad_out.reshape(b, out_c, -1)
    dw = (g @ cols.transpose(0, 2, 1)).sum(axis=0).reshape(filters.shape)
    db = g.sum(axis=(0, 2))
    if not need_input_grad:
        return None, dw, db
    dcols = filters.reshape(out_c, -1).T @ g
    return _col2im(dcols, x_shape, filters.shape[-1], stride, out_hw), dw, db


def linear_forward(x, weight, bias):
    """``weight @ x + bias`` for a vector, or row-wise for a batch [B, n]."""
    x = np.asarray(x)
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} != weight width {weight.shape[1]}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} != ({weight.shape[0]},)")
    return x @ weight.T + bias


def _forward(params: QNetParams, batch):
    t = params.tensors
    g = params.geometry
    x = np.asarray(batch, dtype=params.dtype)
    if x.ndim != 4 or x.shape[1:] != g.input_shape:
        raise ShapeError(f"batch shape {x.shape} does not match input {g.input_shape}")
    z1, win1 = _conv(x, t["conv1_w"], t["conv1_b"], g.conv1.stride)
    h1 = relu(z1)
    z2, win2 = _conv(h1, t["conv2_w"], t["conv2_b"], g.conv2.stride)
    h2 = relu(z2)
    flat = h2.reshape(len(x), -1)
    z3 = linear_forward(flat, t["fc1_w"], t["fc1_b"])
    h3 = relu(z3)
    q = linear_forward(h3, t["out_w"], t["out_b"])
    return q, (win1, z1, h1, win2, z2, flat, z3, h3)


def qnet_forward(params: QNetParams, batch):
    """Q-values [B, num_actions] for a batch of stacked states [B, C, H, W]."""
    return _forward(params, batch)[0]


def _check_actions_targets(actions, targets, batch_size, num_actions):
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets)
    if actions.shape != (batch_size,) or targets.shape != (batch_size,):
        raise ShapeError("need exactly one action and one target per batch element")
    if actions.size and (actions.min() < 0 or actions.max() >= num_actions):
        raise InputError(f"action id out of range [0, {num_actions})")
    return actions, targets


def _td_error(q, actions, targets):
    rows = np.arange(len(q))
    err = q[rows, actions] - targets
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * err / len(q)
    return float(np.mean(err * err)), dq


def qnet_backward(params: QNetParams, batch, actions, targets):
    """Mean squared TD error over the batch and its exact gradient.

    Only the output unit of each sample's chosen action receives error; the
    targets are constants.
    """
    q, (win1, z1, h1, win2, z2, flat, z3, h3) = _forward(params, batch)
    actions, targets = _check_actions_targets(actions, targets, len(q), params.num_actions)
    loss, dq = _td_error(q, actions, targets)
    t = params.tensors
    g = params.geometry
    grads = {"out_w": dq.T @ h3, "out_b": dq.sum(axis=0)}
    dz3 = (dq @ t["out_w"]) * (z3 > 0)
    grads["fc1_w"] = dz3.T @ flat
    grads["fc1_b"] = dz3.sum(axis=0)
    dz2 = (dz3 @ t["fc1_w"]).reshape(z2.shape) * (z2 > 0)
    dh1, grads["conv2_w"], grads["conv2_b"] = _conv_backward(
        dz2, h1.shape, win2, t["conv2_w"], g.conv2.stride, need_input_grad=True)
    dz1 = dh1 * (z1 > 0)
    _, grads["conv1_w"], grads["conv1_b"] = _conv_backward(
        dz1, None, win1, t["conv1_w"], g.conv1.stride, need_input_grad=False)
    return loss, {name: grads[name].astype(params.dtype, copy=False) for name in PARAM_ORDER}


def td_loss(params, batch, actions, targets) -> float:
    q = params.forward(batch)
    actions, targets = _check_actions_targets(actions, targets, len(q), params.num_actions)
    return _td_error(q, actions, targets)[0]


def finite_diff_grad(params, batch, actions, targets, h: float = 1e-5) -> dict:
    """Central-difference estimate of the loss gradient, one scalar at a time.

    Cost is two forward passes per parameter; meant for tiny networks only.
    """
    if not h > 0:
        raise InputError("finite-difference step must be positive")
    tensors = {k: v.copy() for k, v in params.tensors.items()}
    probe = params.replace(tensors)
    grads = {}
    for name, arr in tensors.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = td_loss(probe, batch, actions, targets)
            flat[i] = orig - h
            down = td_loss(probe, batch, actions, targets)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def max_relative_error(a: dict, b: dict, floor: float = 1e-6) -> float:
    """max |a-b| / max(|a|, |b|, floor) over every entry of two gradient dicts."""
    worst = 0.0
    for name in a:
        x, y = np.asarray(a[name], float), np.asarray(b[name], float)
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        if x.size:
            worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst


def gradcheck(instances: int = 20, seed: int = 0, batch_size: int = 4,
              geometry: Geometry = GRADCHECK_GEOMETRY, h: float = 1e-5) -> list[float]:
    """Analytic-vs-numeric gradient comparison on random small nets at float64.

    Returns the max relative error of each instance.
    """
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(instances):
        params = init_params(geometry, int(rng.integers(2**31)), dtype=np.float64)
        tensors = dict(params.tensors)
        for name in PARAM_ORDER:
            if name.endswith("_b"):
                tensors[name] = rng.uniform(-0.1, 0.1, size=tensors[name].shape)
        params = params.replace(tensors)
        batch = rng.uniform(0, 1, size=(batch_size, *geometry.input_shape))
        actions = rng.integers(0, geometry.num_actions, size=batch_size)
        targets = rng.normal(size=batch_size)
        _, analytic = qnet_backward(params, batch, actions, targets)
        numeric = finite_diff_grad(params, batch, actions, targets, h)
        errors.append(max_relative_error(analytic, numeric))
    return errors


@dataclass(frozen=True, eq=False)
class TabularParams:
    """Lookup-table Q-function: a linear map applied to one-hot state vectors."""

    tensors: dict

    @property
    def num_actions(self) -> int:
        return self.tensors["table"].shape[0]

    @property
    def dtype(self):
        return self.tensors["table"].dtype

    def forward(self, batch):
        return np.asarray(batch, dtype=self.dtype) @ self.tensors["table"].T

    def loss_and_grad(self, batch, actions, targets):
        x = np.asarray(batch, dtype=self.dtype)
        q = x @ self.tensors["table"].T
        actions, targets = _check_actions_targets(actions, targets, len(q), self.num_actions)
        loss, dq = _td_error(q, actions, targets)
        return loss, {"table": dq.T @ x}

    def replace(self, tensors: dict) -> "TabularParams":
        return TabularParams(tensors)


def init_tabular(num_states: int, num_actions: int, seed: int, dtype=np.float64) -> TabularParams:
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(num_states)
    table = rng.uniform(-bound, bound, size=(num_actions, num_states)).astype(dtype)
    return TabularParams({"table": table})


@dataclass(frozen=True, eq=False)
class RmsPropState:
    mean_square: dict
    decay: float = 0.95
    epsilon: float = 1e-6
    learning_rate: float = 2.5e-4


def rmsprop_init(params, decay=0.95, epsilon=1e-6, learning_rate=2.5e-4) -> RmsPropState:
    if not 0 < decay < 1 or epsilon <= 0 or learning_rate <= 0:
        raise ConfigError("RMSProp needs 0 < decay < 1, epsilon > 0, learning_rate > 0")
    ms = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return RmsPropState(ms, decay, epsilon, learning_rate)


def rmsprop_step(params, grads: dict, state: RmsPropState):
    """One RMSProp update; returns new ``(params, state)`` and leaves inputs intact."""
    if grads.keys() != params.tensors.keys():
        raise ShapeError("gradient names do not match parameter names")
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise TrainingError(f"non-finite gradient in {', '.join(bad)}")
    decay, eps, lr = state.decay, state.epsilon, state.learning_rate
    new_params, new_ms = {}, {}
    for name, p in params.tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient {name} has shape {g.shape}, expected {p.shape}")
        ms = decay * state.mean_square[name] + (1 - decay) * (g * g)
        new_ms[name] = ms
        new_params[name] = p - lr * g / np.sqrt(ms + eps)
    return params.replace(new_params), RmsPropState(new_ms, decay, eps, lr)
