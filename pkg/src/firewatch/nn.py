"""Small numpy network engine: dense, convolution, max-pool and ReLU layers.

The Q-network has two input branches: dense layers over the scalar state
features and a convolutional stack over the belief image.  The branch
outputs are concatenated and passed through a dense head.
"""
from __future__ import annotations

import copy
import io
import json
import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from firewatch.errors import ConfigError  # noqa: F401  (re-exported)

MAGIC = b"FWQN"
FORMAT_VERSION = 1


class Dense:
    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng=None, dtype=np.float32):
        self.in_dim, self.out_dim = in_dim, out_dim
        rng = rng or np.random.default_rng(0)
        limit = np.sqrt(6.0 / in_dim)
        self.params = {
            "W": rng.uniform(-limit, limit, (in_dim, out_dim)).astype(dtype),
            "b": np.zeros(out_dim, dtype=dtype),
        }

    def out_shape(self, in_shape):
        if in_shape != (self.in_dim,):
            raise ConfigError(f"dense layer expects ({self.in_dim},), got {in_shape}")
        return (self.out_dim,)

    def forward(self, x):
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        grads = {"W": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads

    def spec(self):
        return {"type": self.kind, "in": self.in_dim, "out": self.out_dim}


class Conv2D:
    """Valid convolution (cross-correlation) with a square kernel."""

    kind = "conv"

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1, rng=None, dtype=np.float32):
        self.in_ch, self.out_ch, self.kernel, self.stride = in_ch, out_ch, kernel, stride
        rng = rng or np.random.default_rng(0)
        fan_in = in_ch * kernel * kernel
        limit = np.sqrt(6.0 / fan_in)
        self.params = {
            "W": rng.uniform(-limit, limit, (out_ch, in_ch, kernel, kernel)).astype(dtype),
            "b": np.zeros(out_ch, dtype=dtype),
        }

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.in_ch or h < self.kernel or w < self.kernel:
            raise ConfigError(f"conv layer cannot take input {in_shape}")
        return (self.out_ch, (h - self.kernel) // self.stride + 1, (w - self.kernel) // self.stride + 1)

    def forward(self, x):
        k, s = self.kernel, self.stride
        win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]  # N C Ho Wo k k
        n, c, ho, wo = win.shape[:4]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, ho, wo, c * k * k)
        self._cols, self._in_shape = cols, x.shape
        w = self.params["W"].reshape(self.out_ch, -1)
        y = cols @ w.T + self.params["b"]
        return y.transpose(0, 3, 1, 2)

    def backward(self, dy):
        k, s = self.kernel, self.stride
        n, _, ho, wo = dy.shape
        dy_t = dy.transpose(0, 2, 3, 1)  # N Ho Wo O
        cols = self._cols
        dw = np.tensordot(dy_t, cols, axes=([0, 1, 2], [0, 1, 2])).reshape(self.params["W"].shape)
        db = dy_t.sum(axis=(0, 1, 2))
        dx = np.zeros(self._in_shape, dtype=dy.dtype)
        w = self.params["W"]
        for i in range(k):
            for j in range(k):
                contrib = np.tensordot(dy, w[:, :, i, j], axes=([1], [0]))  # N Ho Wo C
                dx[:, :, i : i + s * (ho - 1) + 1 : s, j : j + s * (wo - 1) + 1 : s] += contrib.transpose(0, 3, 1, 2)
        return dx, {"W": dw, "b": db}

    def spec(self):
        return {"type": self.kind, "in_ch": self.in_ch, "out_ch": self.out_ch, "kernel": self.kernel, "stride": self.stride}


class MaxPool2D:
    """Non-overlapping max-pool; on ties the first element in row-major window order wins."""

    kind = "maxpool"

    def __init__(self, window: int = 2):
        self.window = window
        self.params = {}

    def out_shape(self, in_shape):
        c, h, w = in_shape
        if h < self.window or w < self.window:
            raise ConfigError(f"maxpool cannot take input {in_shape}")
        return (c, h // self.window, w // self.window)

    def forward(self, x):
        p = self.window
        n, c, h, w = x.shape
        ho, wo = h // p, w // p
        xc = x[:, :, : ho * p, : wo * p]
        blocks = xc.reshape(n, c, ho, p, wo, p).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, p * p)
        idx = blocks.argmax(axis=-1)
        self._idx, self._in_shape = idx, x.shape
        return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        p = self.window
        n, c, h, w = self._in_shape
        ho, wo = dy.shape[2:]
        blocks = np.zeros((n, c, ho, wo, p * p), dtype=dy.dtype)
        np.put_along_axis(blocks, self._idx[..., None], dy[..., None], axis=-1)
        dx = np.zeros(self._in_shape, dtype=dy.dtype)
        dx[:, :, : ho * p, : wo * p] = blocks.reshape(n, c, ho, wo, p, p).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * p, wo * p)
        return dx, {}

    def spec(self):
        return {"type": self.kind, "window": self.window}


class ReLU:
    kind = "relu"

    def __init__(self):
        self.params = {}

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype)

    def backward(self, dy):
        return dy * self._mask, {}

    def spec(self):
        return {"type": self.kind}


class Flatten:
    kind = "flatten"

    def __init__(self):
        self.params = {}

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape), {}

    def spec(self):
        return {"type": self.kind}


def _run(layers, x):
    for layer in layers:
        x = layer.forward(x)
    return x


def _back(layers, dy):
    grads = []
    for layer in reversed(layers):
        dy, g = layer.backward(dy)
        grads.append(g)
    return dy, grads[::-1]


class Network:
    """Two-branch Q-network.  ``image_layers`` may be empty for scalar-only inputs."""

    def __init__(self, scalar_layers, image_layers, head_layers, n_scalars: int, image_shape=None):
        self.scalar_layers = list(scalar_layers)
        self.image_layers = list(image_layers)
        self.head_layers = list(head_layers)
        self.n_scalars = n_scalars
        self.image_shape = tuple(image_shape) if image_shape is not None else None
        self._check()

    @property
    def layers(self):
        return self.scalar_layers + self.image_layers + self.head_layers

    def _check(self):
        shape = (self.n_scalars,)
        for layer in self.scalar_layers:
            shape = layer.out_shape(shape)
        merged = shape[0]
        if self.image_layers:
            if self.image_shape is None:
                raise ConfigError("image branch needs an image shape")
            ishape = self.image_shape
            for layer in self.image_layers:
                ishape = layer.out_shape(ishape)
            if len(ishape) != 1:
                raise ConfigError("image branch must end flattened")
            self.image_features = ishape[0]
            merged += ishape[0]
        else:
            self.image_features = 0
        self.branch_features = merged - self.image_features
        shape = (merged,)
        for layer in self.head_layers:
            shape = layer.out_shape(shape)
        if shape != (2,):
            raise ConfigError(f"network must end in two outputs, got {shape}")

    def _check_inputs(self, scalars, images):
        if scalars.ndim != 2 or scalars.shape[1] != self.n_scalars:
            raise ConfigError(f"expected scalars (N, {self.n_scalars}), got {scalars.shape}")
        if self.image_layers:
            if images is None or tuple(images.shape[1:]) != self.image_shape:
                got = None if images is None else images.shape
                raise ConfigError(f"expected images (N, {self.image_shape}), got {got}")

    def forward(self, scalars, images=None):
        scalars = np.asarray(scalars, dtype=self.dtype)
        if scalars.ndim == 1:
            scalars = scalars[None]
            images = None if images is None else np.asarray(images)[None]
        self._check_inputs(scalars, images)
        h = _run(self.scalar_layers, scalars)
        if self.image_layers:
            g = _run(self.image_layers, np.asarray(images, dtype=self.dtype))
            h = np.concatenate([h, g], axis=1)
        return _run(self.head_layers, h)

    def backward(self, dq):
        """Back-propagate dLoss/dQ; returns per-layer gradient dicts aligned with ``layers``."""
        dh, g_head = _back(self.head_layers, dq)
        d_scalar = dh[:, : self.branch_features]
        _, g_scalar = _back(self.scalar_layers, d_scalar)
        g_image = []
        if self.image_layers:
            _, g_image = _back(self.image_layers, dh[:, self.branch_features :])
        return g_scalar + g_image + g_head

    @property
    def dtype(self):
        for layer in self.layers:
            for p in layer.params.values():
                return p.dtype
        return np.float32

    def parameters(self):
        return [p for layer in self.layers for p in layer.params.values()]

    def astype(self, dtype) -> Network:
        out = copy.deepcopy(self)
        for layer in out.layers:
            for k in layer.params:
                layer.params[k] = layer.params[k].astype(dtype)
        return out

    def clone(self) -> Network:
        return copy.deepcopy(self)

    def copy_from(self, other: Network):
        for a, b in zip(self.layers, other.layers):
            for k in a.params:
                a.params[k][...] = b.params[k]

    def manifest(self):
        return {
            "n_scalars": self.n_scalars,
            "image_shape": list(self.image_shape) if self.image_shape else None,
            "scalar": [l.spec() for l in self.scalar_layers],
            "image": [l.spec() for l in self.image_layers],
            "head": [l.spec() for l in self.head_layers],
        }


def forward(net: Network, scalars, images=None):
    return net.forward(scalars, images)


def masked_loss_and_grads(net: Network, scalars, images, targets, mask):
    """Mean over the batch of 0.5 * sum_a mask_a * (Q_a - target_a)^2 and its gradients."""
    q = net.forward(scalars, images)
    n = q.shape[0]
    err = (q - np.asarray(targets, q.dtype)) * np.asarray(mask, q.dtype)
    loss = 0.5 * float(np.sum(err.astype(np.float64) ** 2)) / n
    grads = net.backward(err / n)
    return loss, grads


def backward(net: Network, scalars, images, target, action_mask):
    """Gradient dicts of the masked squared error, one per layer."""
    return masked_loss_and_grads(net, scalars, images, target, action_mask)[1]


def build_q_network(
    n_scalars: int = 5,
    image_size: int | None = 64,
    rng=None,
    scalar_hidden=(32, 32),
    conv=((8, 5, 2), (16, 3, 1)),
    pool: int = 2,
    head_hidden: int = 64,
    dtype=np.float32,
) -> Network:
    rng = rng if rng is not None else np.random.default_rng(0)
    scalar_layers = []
    d = n_scalars
    for width in scalar_hidden:
        scalar_layers += [Dense(d, width, rng, dtype), ReLU()]
        d = width
    image_layers = []
    image_shape = None
    if image_size:
        image_shape = (1, image_size, image_size)
        ch = 1
        for out_ch, k, s in conv:
            image_layers += [Conv2D(ch, out_ch, k, s, rng, dtype), ReLU(), MaxPool2D(pool)]
            ch = out_ch
        image_layers.append(Flatten())
    merged = scalar_layers[-2].out_dim if scalar_layers else n_scalars
    if image_layers:
        shape = image_shape
        for layer in image_layers:
            shape = layer.out_shape(shape)
        merged += shape[0]
    head = [Dense(merged, head_hidden, rng, dtype), ReLU(), Dense(head_hidden, 2, rng, dtype)]
    return Network(scalar_layers, image_layers, head, n_scalars, image_shape)


def _layer_from_spec(spec):
    kind = spec["type"]
    if kind == "dense":
        return Dense(spec["in"], spec["out"])
    if kind == "conv":
        return Conv2D(spec["in_ch"], spec["out_ch"], spec["kernel"], spec["stride"])
    if kind == "maxpool":
        return MaxPool2D(spec["window"])
    if kind == "relu":
        return ReLU()
    if kind == "flatten":
        return Flatten()
    raise ConfigError(f"unknown layer type {kind!r}")


def save_weights(net: Network, path):
    """Write MAGIC, u16 version, u32 manifest length, JSON manifest, then little-endian float32 blocks."""
    manifest = json.dumps(net.manifest()).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HI", FORMAT_VERSION, len(manifest)))
    buf.write(manifest)
    for p in net.parameters():
        buf.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_weights(path) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ConfigError(f"{path}: not a weight file")
    version, mlen = struct.unpack_from("<HI", data, 4)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported weight format version {version}")
    offset = 10
    manifest = json.loads(data[offset : offset + mlen])
    offset += mlen
    net = Network(
        [_layer_from_spec(s) for s in manifest["scalar"]],
        [_layer_from_spec(s) for s in manifest["image"]],
        [_layer_from_spec(s) for s in manifest["head"]],
        manifest["n_scalars"],
        manifest["image_shape"],
    )
    for layer in net.layers:
        for k, p in layer.params.items():
            count = p.size
            block = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
            layer.params[k] = block.reshape(p.shape).astype(np.float32)
            offset += 4 * count
    if offset != len(data):
        raise ConfigError(f"{path}: trailing bytes after parameter blocks")
    return net
