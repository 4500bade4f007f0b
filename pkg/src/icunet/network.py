"""1D U-Net denoiser with hand-written forward and backward passes.

Feature maps are laid out ``(batch, channels, length)``. Parameters live in
a flat ordered ``dict`` (see :func:`param_shapes` for the canonical order);
``running_mean``/``running_var`` entries are batchnorm state and are never
touched by the optimizer.

Architecture, per encoder level ``i``: two CBR blocks (conv, batchnorm,
ReLU) with ``base_filters * 2**i`` filters, then max-pooling. The
bottleneck holds two CBR blocks. Each decoder level upsamples with a
transposed convolution that halves the filter count, concatenates
``[upsampled, encoder skip]`` along channels and applies two CBR blocks. A
1x1 convolution projects back to ``in_channels`` with no activation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateBatch, InvalidSpec, ShapeMismatch, StaleCache

RUNNING_SUFFIXES = (".running_mean", ".running_var")


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int
    base_filters: int = 64
    depth: int = 4
    kernel_size: int = 3
    pool_size: int = 2
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.in_channels < 1 or self.base_filters < 1 or self.depth < 0:
            raise InvalidSpec("in_channels, base_filters must be >= 1 and depth >= 0")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise InvalidSpec(f"kernel_size must be odd, got {self.kernel_size}")
        if self.pool_size < 1:
            raise InvalidSpec("pool_size must be >= 1")
        if not 0 < self.bn_momentum < 1:
            raise InvalidSpec("bn_momentum must lie in (0, 1)")

    def filters(self, level: int) -> int:
        return self.base_filters * 2 ** level

    def check_input(self, x: np.ndarray) -> None:
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"expected (batch, {self.in_channels}, t) input, got {x.shape}")
        step = self.pool_size ** self.depth
        if x.shape[2] % step:
            raise ShapeMismatch(f"length {x.shape[2]} is not divisible by {step}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


# -- primitives --------------------------------------------------------------

def conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Stride-1 cross-correlation with zero 'same' padding.

    ``x``: (batch, in, L) or (in, L); ``w``: (out, in, k) with ``k`` odd.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if w.shape[1] != x.shape[1]:
        raise ShapeMismatch(f"kernel expects {w.shape[1]} input channels, got {x.shape[1]}")
    y, _ = _conv1d_cols(x, w, b)
    return y[0] if squeeze else y


def _conv1d_cols(x, w, b):
    cols = _im2col(x, w.shape[2])
    y = np.matmul(w.reshape(w.shape[0], -1), cols)
    if b is not None:
        y += b[:, None]
    return y, cols


def _im2col(x, k):
    if k == 1:
        return x
    n, c, length = x.shape
    pad = k // 2
    cols = np.empty((n, c, k, length), dtype=x.dtype)
    for m in range(k):
        shift = m - pad
        if shift < 0:
            cols[:, :, m, :-shift] = 0
            cols[:, :, m, -shift:] = x[:, :, :shift]
        elif shift > 0:
            cols[:, :, m, :-shift] = x[:, :, shift:]
            cols[:, :, m, -shift:] = 0
        else:
            cols[:, :, m] = x
    return cols.reshape(n, c * k, length)


def conv1d_backward(x, w, dy, cols=None):
    """Gradients ``(dx, dw, db)`` of :func:`conv1d` given upstream ``dy``.

    ``cols`` may pass in the unfolded input saved by the forward pass.
    """
    k = w.shape[2]
    n, c, length = x.shape
    if cols is None:
        cols = _im2col(x, k)
    dw = np.matmul(dy, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dy.sum(axis=(0, 2))
    dcols = np.matmul(w.reshape(w.shape[0], -1).T, dy)
    if k == 1:
        return dcols, dw, db
    dcols = dcols.reshape(n, c, k, length)
    pad = k // 2
    dx = dcols[:, :, pad].copy()
    for m in range(k):
        shift = m - pad
        if shift < 0:
            dx[:, :, :shift] += dcols[:, :, m, -shift:]
        elif shift > 0:
            dx[:, :, shift:] += dcols[:, :, m, :-shift]
    return dx, dw, db


def conv1d_strided(x, w, stride):
    """Valid (unpadded) strided cross-correlation; the adjoint of :func:`convtranspose1d`."""
    # w shares the (in, out, k) layout of convtranspose1d, so this maps out -> in
    n, _, length = x.shape
    k = w.shape[2]
    out_len = (length - k) // stride + 1
    y = np.zeros((n, w.shape[0], out_len), dtype=np.result_type(x, w))
    for m in range(k):
        xs = x[:, :, m:m + (out_len - 1) * stride + 1:stride]
        y += np.matmul(w[:, :, m], xs)
    return y


def convtranspose1d(x, w, stride, b=None):
    """Transposed convolution: ``x`` (batch, in, L), ``w`` (in, out, k).

    Output length is ``(L - 1) * stride + k``, i.e. ``L * stride`` when
    ``k == stride``.
    """
    if w.shape[0] != x.shape[1]:
        raise ShapeMismatch(f"kernel expects {w.shape[0]} input channels, got {x.shape[1]}")
    n, _, length = x.shape
    c_in, c_out, k = w.shape
    if k == stride:
        z = np.matmul(w.reshape(c_in, c_out * k).T, x)
        y = z.reshape(n, c_out, k, length).transpose(0, 1, 3, 2).reshape(n, c_out, length * k)
    else:
        y = np.zeros((n, c_out, (length - 1) * stride + k), dtype=np.result_type(x, w))
        for m in range(k):
            y[:, :, m:m + (length - 1) * stride + 1:stride] += np.matmul(w[:, :, m].T, x)
    if b is not None:
        y += b[:, None]
    return y


def convtranspose1d_backward(x, w, stride, dy):
    n, _, length = x.shape
    c_in, c_out, k = w.shape
    if k == stride:
        dys = dy.reshape(n, c_out, length, k).transpose(0, 1, 3, 2).reshape(n, c_out * k, length)
        dx = np.matmul(w.reshape(c_in, c_out * k), dys)
        dw = np.matmul(x, dys.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        return dx, dw, dy.sum(axis=(0, 2))
    dx = np.zeros_like(x, dtype=dy.dtype)
    dw = np.empty_like(w, dtype=dy.dtype)
    for m in range(k):
        dys = dy[:, :, m:m + (length - 1) * stride + 1:stride]
        dx += np.matmul(w[:, :, m], dys)
        dw[:, :, m] = np.matmul(x, dys.transpose(0, 2, 1)).sum(axis=0)
    return dx, dw, dy.sum(axis=(0, 2))


def _channel_sum(x):
    """Sum over (batch, length) per channel."""
    return np.matmul(x, np.ones(x.shape[2], dtype=x.dtype)).sum(axis=0)


def _channel_dot(a, b):
    return np.einsum("bcl,bcl->c", a, b)


def batchnorm_train(x, gamma, beta, eps):
    """Normalize with batch statistics over (batch, length).

    Returns ``(y, cache, (mean, var))`` with the biased batch variance.
    """
    count = x.shape[0] * x.shape[2]
    if count < 2:
        raise DegenerateBatch("batchnorm needs at least two values per feature in train mode")
    mean = _channel_sum(x) / count
    xhat = x - mean[:, None]
    var = _channel_dot(xhat, xhat) / count
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat *= inv_std[:, None]
    y = xhat * gamma[:, None]
    y += beta[:, None]
    return y, (xhat, inv_std, gamma), (mean, var)


def batchnorm_infer(x, gamma, beta, running_mean, running_var, eps):
    scale = gamma / np.sqrt(running_var + eps)
    return x * scale[:, None] + (beta - running_mean * scale)[:, None]


def batchnorm_backward(cache, dy):
    """Uses sum(dxhat) = gamma * dbeta and sum(dxhat * xhat) = gamma * dgamma."""
    xhat, inv_std, gamma = cache
    count = dy.shape[0] * dy.shape[2]
    dgamma = _channel_dot(dy, xhat)
    dbeta = _channel_sum(dy)
    scale = gamma * inv_std
    dx = dy - (dbeta / count)[:, None]
    dx -= xhat * (dgamma / count)[:, None]
    dx *= scale[:, None]
    return dx, dgamma, dbeta


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, dy):
    """Subgradient 0 at ``x == 0``."""
    return dy * (x > 0)


def maxpool1d(x, pool):
    """Non-overlapping max pool; also returns the argmax (first on ties)."""
    n, c, length = x.shape
    if length % pool:
        raise ShapeMismatch(f"length {length} is not divisible by pool size {pool}")
    windows = x.reshape(n, c, length // pool, pool)
    idx = windows.argmax(axis=3)
    return np.take_along_axis(windows, idx[..., None], axis=3)[..., 0], idx


def maxpool1d_backward(idx, pool, dy):
    n, c, out_len = dy.shape
    dx = np.zeros((n, c, out_len, pool), dtype=dy.dtype)
    np.put_along_axis(dx, idx[..., None], dy[..., None], axis=3)
    return dx.reshape(n, c, out_len * pool)


# -- parameters ----------------------------------------------------------------

def _blocks(config: UNetConfig):
    """Yield ``(name, in_channels, out_channels)`` for every CBR block in order."""
    c_in = config.in_channels
    for i in range(config.depth):
        f = config.filters(i)
        yield f"enc{i}.cbr0", c_in, f
        yield f"enc{i}.cbr1", f, f
        c_in = f
    f = config.filters(config.depth)
    yield "bottleneck.cbr0", c_in, f
    yield "bottleneck.cbr1", f, f
    for i in reversed(range(config.depth)):
        f = config.filters(i)
        yield f"dec{i}.cbr0", 2 * f, f
        yield f"dec{i}.cbr1", f, f


def param_shapes(config: UNetConfig) -> dict[str, tuple[int, ...]]:
    """Canonical parameter order and shapes (also the checkpoint order)."""
    k, p = config.kernel_size, config.pool_size
    shapes: dict[str, tuple[int, ...]] = {}
    for name, c_in, c_out in _blocks(config):
        if name.startswith("dec") and name.endswith("cbr0"):
            level = int(name[3:name.index(".")])
            up = f"dec{level}.up"
            shapes[up + ".weight"] = (config.filters(level + 1), config.filters(level), p)
            shapes[up + ".bias"] = (config.filters(level),)
        shapes[name + ".conv.weight"] = (c_out, c_in, k)
        shapes[name + ".conv.bias"] = (c_out,)
        for suffix in (".bn.gamma", ".bn.beta", ".bn.running_mean", ".bn.running_var"):
            shapes[name + suffix] = (c_out,)
    shapes["head.weight"] = (config.in_channels, config.base_filters, 1)
    shapes["head.bias"] = (config.in_channels,)
    return shapes


def is_trainable(name: str) -> bool:
    return not name.endswith(RUNNING_SUFFIXES)


def _fan_in(name: str, shape, config: UNetConfig) -> int:
    if name.endswith(".up.weight"):
        # each output sample of a transposed conv sums in_ch * ceil(k / stride) products
        return shape[0] * -(-shape[2] // config.pool_size)
    return shape[1] * shape[2]


def init_params(config: UNetConfig, seed: int = 0, dtype=np.float64) -> dict[str, np.ndarray]:
    """He-normal kernels (variance 2/fan_in); zero biases and shifts, unit scales."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("weight"):
            std = np.sqrt(2.0 / _fan_in(name, shape, config))
            value = rng.standard_normal(shape) * std
        elif name.endswith((".gamma", ".running_var")):
            value = np.ones(shape)
        else:
            value = np.zeros(shape)
        params[name] = value.astype(dtype)
    return params


def identity_params(config: UNetConfig, dtype=np.float32) -> dict[str, np.ndarray]:
    """Parameters for which the inference-mode network is exactly the identity.

    The top encoder level splits ``x`` into ``relu(x)`` and ``relu(-x)``, the
    skip carries both through the top decoder level and the head recombines
    them; deeper levels are zeroed. Needs ``base_filters >= 2 * in_channels``.
    Batchnorm running variance is ``1 - eps`` so the inference scale is 1.
    """
    c, k, f = config.in_channels, config.kernel_size, config.base_filters
    if f < 2 * c:
        raise InvalidSpec(f"identity needs base_filters >= {2 * c}, got {f}")
    params = {name: np.zeros(shape, dtype=dtype) for name, shape in param_shapes(config).items()}
    one_minus_eps = dtype(1.0) - dtype(config.bn_eps)
    for name in params:
        if name.endswith(".bn.gamma"):
            params[name][:] = 1
        elif name.endswith(".bn.running_var"):
            params[name][:] = one_minus_eps
    centre = k // 2
    top = "enc0.cbr0" if config.depth else "bottleneck.cbr0"
    w = params[top + ".conv.weight"]
    for j in range(c):
        w[j, j, centre] = 1
        w[c + j, j, centre] = -1
    passes = [top.replace("cbr0", "cbr1")]
    if config.depth:
        passes += ["dec0.cbr1"]
        skip = params["dec0.cbr0.conv.weight"]
        for j in range(2 * c):
            skip[j, f + j, centre] = 1
    for name in passes:
        for j in range(2 * c):
            params[name + ".conv.weight"][j, j, centre] = 1
    for j in range(c):
        params["head.weight"][j, j, 0] = 1
        params["head.weight"][j, c + j, 0] = -1
    return params


def check_params(params: dict, config: UNetConfig) -> None:
    expected = param_shapes(config)
    if list(params) != list(expected):
        missing = set(expected) ^ set(params)
        raise ShapeMismatch(f"parameter names differ from config: {sorted(missing)[:4]}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeMismatch(f"{name}: expected {shape}, got {params[name].shape}")


# -- forward / backward --------------------------------------------------------

@dataclass
class ForwardCache:
    """Activations recorded by a train-mode forward pass.

    ``running`` holds the updated batchnorm running statistics; the caller
    decides whether to commit them.
    """

    input_shape: tuple[int, ...]
    layers: dict = field(default_factory=dict)
    running: dict = field(default_factory=dict)


def _cbr(params, config, name, x, mode, cache):
    w = params[name + ".conv.weight"]
    z, cols = _conv1d_cols(x, w, params[name + ".conv.bias"])
    gamma, beta = params[name + ".bn.gamma"], params[name + ".bn.beta"]
    rm, rv = params[name + ".bn.running_mean"], params[name + ".bn.running_var"]
    if mode == "train":
        h, bn_cache, (mean, var) = batchnorm_train(z, gamma, beta, config.bn_eps)
        m = config.bn_momentum
        cache.running[name + ".bn.running_mean"] = ((1 - m) * rm + m * mean).astype(rm.dtype)
        cache.running[name + ".bn.running_var"] = ((1 - m) * rv + m * var).astype(rv.dtype)
        cache.layers[name] = (x, cols, bn_cache, h)
    else:
        h = batchnorm_infer(z, gamma, beta, rm, rv, config.bn_eps)
    return relu(h)


def _cbr_backward(params, name, cache, da, grads):
    x, cols, bn_cache, h = cache.layers[name]
    dh = relu_backward(h, da)
    dz, grads[name + ".bn.gamma"], grads[name + ".bn.beta"] = batchnorm_backward(bn_cache, dh)
    dx, grads[name + ".conv.weight"], grads[name + ".conv.bias"] = conv1d_backward(
        x, params[name + ".conv.weight"], dz, cols)
    return dx


def forward(params: dict, config: UNetConfig, x: np.ndarray, mode: str = "infer"):
    """Run the network on a ``(batch, c, t)`` array.

    Returns ``(y, cache)``; ``cache`` is ``None`` in ``"infer"`` mode.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    config.check_input(x)
    cache = ForwardCache(x.shape) if mode == "train" else None
    p = config.pool_size
    skips = []
    h = x
    for i in range(config.depth):
        h = _cbr(params, config, f"enc{i}.cbr0", h, mode, cache)
        h = _cbr(params, config, f"enc{i}.cbr1", h, mode, cache)
        skips.append(h)
        h, idx = maxpool1d(h, p)
        if cache is not None:
            cache.layers[f"enc{i}.pool"] = idx
    h = _cbr(params, config, "bottleneck.cbr0", h, mode, cache)
    h = _cbr(params, config, "bottleneck.cbr1", h, mode, cache)
    for i in reversed(range(config.depth)):
        if cache is not None:
            cache.layers[f"dec{i}.up"] = h
        up = convtranspose1d(h, params[f"dec{i}.up.weight"], p, params[f"dec{i}.up.bias"])
        h = np.concatenate([up, skips[i]], axis=1)
        h = _cbr(params, config, f"dec{i}.cbr0", h, mode, cache)
        h = _cbr(params, config, f"dec{i}.cbr1", h, mode, cache)
    if cache is not None:
        cache.layers["head"] = h
    y = conv1d(h, params["head.weight"], params["head.bias"])
    return y, cache


def backward(params: dict, config: UNetConfig, cache: ForwardCache, dy: np.ndarray) -> dict:
    """Gradients of ``sum(dy * forward(x))`` for every trainable parameter."""
    if cache is None or dy.shape != cache.input_shape or "head" not in cache.layers:
        raise StaleCache("backward needs the train-mode cache of a forward pass on this batch")
    grads: dict[str, np.ndarray] = {}
    p = config.pool_size
    dh, grads["head.weight"], grads["head.bias"] = conv1d_backward(
        cache.layers["head"], params["head.weight"], dy)
    dskips = [None] * config.depth
    for i in range(config.depth):
        dh = _cbr_backward(params, f"dec{i}.cbr1", cache, dh, grads)
        dh = _cbr_backward(params, f"dec{i}.cbr0", cache, dh, grads)
        f = config.filters(i)
        dup, dskips[i] = dh[:, :f], dh[:, f:]
        dh, grads[f"dec{i}.up.weight"], grads[f"dec{i}.up.bias"] = convtranspose1d_backward(
            cache.layers[f"dec{i}.up"], params[f"dec{i}.up.weight"], p, dup)
    dh = _cbr_backward(params, "bottleneck.cbr1", cache, dh, grads)
    dh = _cbr_backward(params, "bottleneck.cbr0", cache, dh, grads)
    for i in reversed(range(config.depth)):
        dh = maxpool1d_backward(cache.layers[f"enc{i}.pool"], p, dh) + dskips[i]
        dh = _cbr_backward(params, f"enc{i}.cbr1", cache, dh, grads)
        dh = _cbr_backward(params, f"enc{i}.cbr0", cache, dh, grads)
    return {name: grads[name] for name in params if is_trainable(name)}


def predict(params: dict, config: UNetConfig, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Inference-mode forward in fixed-size chunks."""
    x = np.asarray(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    dtype = params["head.weight"].dtype
    out = np.empty(x.shape, dtype=dtype)
    for start in range(0, x.shape[0], batch_size):
        out[start:start + batch_size] = forward(
            params, config, x[start:start + batch_size].astype(dtype, copy=False))[0]
    return out[0] if squeeze else out


class UNet:
    """Callable inference wrapper around ``(params, config)``."""

    def __init__(self, params: dict, config: UNetConfig, batch_size: int = 256):
        check_params(params, config)
        self.params = params
        self.config = config
        self.batch_size = batch_size

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return predict(self.params, self.config, x, self.batch_size)
