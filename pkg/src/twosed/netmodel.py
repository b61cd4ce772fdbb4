"""Stochastic feed-forward (Markovian) models.

A model is an ordered list of parametric blocks.  Block ``j`` maps the
previous sample ``x_{j-1}`` to a deterministic output ``o_j = O_j(x_{j-1})``
and the stochastic version emits ``x_j = o_j + nu_j`` with
``nu_j ~ N(0, sigma2 I)``.  The log-likelihood gradient of a block is
``J^T (x_j - o_j) / sigma2`` with ``J = dO_j / dtheta_j``.

All block routines are batched over the leading axis.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidVariance, ParseError, ShapeError

__all__ = [
    "Linear",
    "Conv",
    "Flatten",
    "ModelSpec",
    "ParamVector",
    "Trajectory",
    "parse_model_string",
    "load_model_config",
    "param_count",
    "sample_params",
    "block_forward",
    "flatten_conv",
    "forward_sample",
    "block_grad_loglik",
    "rng_for",
]

DEFAULT_SIGMA2 = 1e-2
BN_EPS = 1e-5

# stream tags for counter-keyed generators
STREAM_THETA = 1
STREAM_NOISE = 2
STREAM_DATA = 3


def rng_for(*key: int) -> np.random.Generator:
    """Generator keyed by a tuple of non-negative integers (order-independent of scheduling)."""
    return np.random.default_rng([int(k) for k in key])


def _relu_mask(pre):
    # ReLU derivative at exactly 0 is taken as 0
    return pre > 0.0


# ---------------------------------------------------------------------------
# blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    in_width: int
    out_width: int
    relu: bool = True
    bias: bool = False

    def __post_init__(self):
        if self.in_width < 1 or self.out_width < 1:
            raise ShapeError("Linear widths must be >= 1")

    @property
    def in_shape(self):
        return (self.in_width,)

    @property
    def out_shape(self):
        return (self.out_width,)

    @property
    def n_params(self) -> int:
        return self.in_width * self.out_width + (self.out_width if self.bias else 0)

    @property
    def fan_in(self) -> int:
        return self.in_width

    def _unpack(self, theta):
        w = theta[: self.in_width * self.out_width].reshape(self.out_width, self.in_width)
        b = theta[self.in_width * self.out_width:] if self.bias else None
        return w, b

    def forward(self, theta, x):
        w, b = self._unpack(theta)
        pre = x @ w.T
        if b is not None:
            pre = pre + b
        out = np.maximum(pre, 0.0) if self.relu else pre
        return out, (x, pre)

    def backward(self, theta, cache, g, per_sample=True):
        """Return (parameter gradient, input gradient) for upstream gradient ``g``."""
        x, pre = cache
        w, _ = self._unpack(theta)
        delta = g * _relu_mask(pre) if self.relu else g
        if per_sample:
            gw = (delta[:, :, None] * x[:, None, :]).reshape(len(x), -1)
            gt = np.concatenate([gw, delta], axis=1) if self.bias else gw
        else:
            gw = (delta.T @ x).ravel()
            gt = np.concatenate([gw, delta.sum(axis=0)]) if self.bias else gw
        return gt, delta @ w


@dataclass(frozen=True)
class Conv:
    """Convolution -> per-channel standardization -> ReLU -> 2x2 max pool.

    Standardization statistics are taken over the spatial positions of each
    input separately, followed by a learnable per-channel scale and shift.
    """

    kernel_size: int
    in_channels: int
    out_channels: int
    height: int
    width: int
    with_pool: bool = True
    with_norm: bool = True
    padding: int = 0

    def __post_init__(self):
        if min(self.kernel_size, self.in_channels, self.out_channels, self.height, self.width) < 1:
            raise ShapeError("Conv sizes must be >= 1")
        ch, cw = self.conv_hw
        if ch < 1 or cw < 1:
            raise ShapeError(
                f"kernel {self.kernel_size} does not fit a {self.height}x{self.width} input"
            )
        if self.with_pool and (ch < 2 or cw < 2):
            raise ShapeError(f"cannot 2x2-pool a {ch}x{cw} feature map")

    @property
    def conv_hw(self):
        p, k = self.padding, self.kernel_size
        return self.height + 2 * p - k + 1, self.width + 2 * p - k + 1

    @property
    def in_shape(self):
        return (self.in_channels, self.height, self.width)

    @property
    def out_shape(self):
        h, w = self.conv_hw
        if self.with_pool:
            h, w = h // 2, w // 2
        return (self.out_channels, h, w)

    @property
    def n_kernel(self) -> int:
        return self.kernel_size ** 2 * self.in_channels * self.out_channels

    @property
    def n_params(self) -> int:
        return self.n_kernel + (2 * self.out_channels if self.with_norm else 0)

    @property
    def fan_in(self) -> int:
        return self.kernel_size ** 2 * self.in_channels

    def _unpack(self, theta):
        k = self.kernel_size
        kern = theta[: self.n_kernel].reshape(self.out_channels, self.in_channels, k, k)
        if self.with_norm:
            gamma = theta[self.n_kernel: self.n_kernel + self.out_channels]
            beta = theta[self.n_kernel + self.out_channels:]
            return kern, gamma, beta
        return kern, None, None

    def forward(self, theta, x):
        kern, gamma, beta = self._unpack(theta)
        p, k = self.padding, self.kernel_size
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (k, k), axis=(2, 3))  # N,C,H',W',k,k
        y = np.einsum("nchwij,ocij->nohw", win, kern, optimize=True)
        cache = {"x_shape": x.shape, "win": win}
        if self.with_norm:
            mu = y.mean(axis=(2, 3), keepdims=True)
            inv = 1.0 / np.sqrt(y.var(axis=(2, 3), keepdims=True) + BN_EPS)
            xhat = (y - mu) * inv
            z = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
            cache.update(xhat=xhat, inv=inv)
        else:
            z = y
        a = np.maximum(z, 0.0)
        cache["z"] = z
        if self.with_pool:
            n, c, h, w = a.shape
            h2, w2 = h // 2, w // 2
            blocks = (
                a[:, :, : 2 * h2, : 2 * w2]
                .reshape(n, c, h2, 2, w2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(n, c, h2, w2, 4)
            )
            arg = np.argmax(blocks, axis=-1)
            out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
            cache.update(arg=arg, a_shape=a.shape)
        else:
            out = a
        return out, cache

    def backward(self, theta, cache, g, per_sample=True):
        kern, gamma, _ = self._unpack(theta)
        p, k = self.padding, self.kernel_size
        if self.with_pool:
            n, c, h, w = cache["a_shape"]
            h2, w2 = h // 2, w // 2
            onehot = np.zeros((n, c, h2, w2, 4))
            np.put_along_axis(onehot, cache["arg"][..., None], g[..., None], axis=-1)
            da = np.zeros((n, c, h, w))
            da[:, :, : 2 * h2, : 2 * w2] = (
                onehot.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)
            )
        else:
            da = g
        dz = da * _relu_mask(cache["z"])
        parts = []
        if self.with_norm:
            xhat, inv = cache["xhat"], cache["inv"]
            dgamma = np.sum(dz * xhat, axis=(2, 3))
            dbeta = np.sum(dz, axis=(2, 3))
            dxhat = dz * gamma[None, :, None, None]
            dy = inv * (
                dxhat
                - dxhat.mean(axis=(2, 3), keepdims=True)
                - xhat * np.mean(dxhat * xhat, axis=(2, 3), keepdims=True)
            )
        else:
            dy = dz
        win = cache["win"]
        if per_sample:
            dk = np.einsum("nohw,nchwij->nocij", dy, win, optimize=True).reshape(len(dy), -1)
            parts.append(dk)
            if self.with_norm:
                parts += [dgamma, dbeta]
            gt = np.concatenate(parts, axis=1)
        else:
            dk = np.einsum("nohw,nchwij->ocij", dy, win, optimize=True).ravel()
            parts.append(dk)
            if self.with_norm:
                parts += [dgamma.sum(axis=0), dbeta.sum(axis=0)]
            gt = np.concatenate(parts)
        # input gradient: scatter the window gradients back onto the padded input
        dwin = np.einsum("nohw,ocij->nchwij", dy, kern, optimize=True)
        n, c, hh, ww = cache["x_shape"]
        dxp = np.zeros((n, c, hh + 2 * p, ww + 2 * p))
        ch, cw = self.conv_hw
        for i in range(k):
            for j in range(k):
                dxp[:, :, i: i + ch, j: j + cw] += dwin[..., i, j]
        dx = dxp[:, :, p: p + hh, p: p + ww] if p else dxp
        return gt, dx


@dataclass(frozen=True)
class Flatten:
    """Per-channel Frobenius product with one shared ``k x k`` kernel."""

    k: int
    channels: int

    def __post_init__(self):
        if self.k < 1 or self.channels < 1:
            raise ShapeError("Flatten sizes must be >= 1")

    @property
    def in_shape(self):
        return (self.channels, self.k, self.k)

    @property
    def out_shape(self):
        return (self.channels,)

    @property
    def n_params(self) -> int:
        return self.k * self.k

    @property
    def fan_in(self) -> int:
        return self.k * self.k

    def forward(self, theta, x):
        kern = theta.reshape(self.k, self.k)
        return np.einsum("ncij,ij->nc", x, kern), x

    def backward(self, theta, cache, g, per_sample=True):
        x = cache
        kern = theta.reshape(self.k, self.k)
        if per_sample:
            gt = np.einsum("nc,ncij->nij", g, x).reshape(len(x), -1)
        else:
            gt = np.einsum("nc,ncij->ij", g, x).ravel()
        return gt, g[:, :, None, None] * kern[None, None]


def flatten_conv(a, kernel):
    """``[Flat_K(A)]_l = sum_ij A[l, i, j] K[i, j]`` for one ``C x k x k`` tensor."""
    a = np.asarray(a, dtype=np.float64)
    kern = np.asarray(kernel, dtype=np.float64)
    if a.ndim != 3 or kern.ndim != 2 or a.shape[1:] != kern.shape or kern.shape[0] != kern.shape[1]:
        raise ShapeError(f"cannot flatten {a.shape} with kernel {kern.shape}")
    return np.einsum("lij,ij->l", a, kern)


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    blocks: tuple
    input_shape: tuple
    sigma2: float = DEFAULT_SIGMA2
    name: str = ""

    def __post_init__(self):
        if not self.blocks:
            raise ShapeError("a model needs at least one block")
        shape = tuple(self.input_shape)
        for j, b in enumerate(self.blocks):
            if tuple(b.in_shape) != shape:
                raise ShapeError(f"block {j + 1} expects {b.in_shape}, receives {shape}")
            shape = tuple(b.out_shape)
        # sigma2 = 0 is allowed for noiseless forward passes; gradients need sigma2 > 0
        if not self.sigma2 >= 0:
            raise InvalidVariance(f"sigma2 must be non-negative, got {self.sigma2}")

    @property
    def block_dims(self) -> tuple:
        return tuple(b.n_params for b in self.blocks)

    @property
    def d(self) -> int:
        return sum(self.block_dims)

    @property
    def output_shape(self):
        return tuple(self.blocks[-1].out_shape)

    def with_sigma2(self, sigma2):
        return ModelSpec(self.blocks, self.input_shape, sigma2, self.name)


@dataclass(frozen=True)
class ParamVector:
    """One parameter point, stored as per-block flat slices."""

    slices: tuple

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.slices) if self.slices else np.zeros(0)

    @classmethod
    def from_flat(cls, spec: ModelSpec, flat) -> "ParamVector":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (spec.d,):
            raise ShapeError(f"expected {spec.d} parameters, got {flat.shape}")
        cuts = np.cumsum((0,) + spec.block_dims)
        return cls(tuple(flat[a:b].copy() for a, b in zip(cuts[:-1], cuts[1:])))

    def check(self, spec: ModelSpec):
        dims = tuple(len(s) for s in self.slices)
        if dims != spec.block_dims:
            raise ShapeError(f"slice lengths {dims} do not match block dims {spec.block_dims}")


_TOKEN = re.compile(r"\s*(MLP|CNN)(?=\s|$)\s*")


def _parse_ints(s, start, stop, what):
    """Parse ``n(-n)*`` in ``s[start:stop]``; returns the integers."""
    vals = []
    pos = start
    while True:
        m = re.compile(r"\d+").match(s, pos, stop)
        if not m:
            raise ParseError(f"expected a {what} integer", position=pos)
        v = int(m.group())
        if v < 1:
            raise ParseError(f"{what} must be >= 1", position=pos)
        vals.append(v)
        pos = m.end()
        if pos == stop:
            return vals
        if s[pos] != "-":
            raise ParseError(f"unexpected character {s[pos]!r}", position=pos)
        pos += 1


def parse_model_string(s, input_shape=None, conv_channels=None, sigma2=DEFAULT_SIGMA2,
                       bias=False, padding=0, with_norm=True, with_pool=True) -> ModelSpec:
    """Build a :class:`ModelSpec` from ``"MLP 54-16-7"`` or ``"CNN 7-5|10-50-34-10"``.

    MLP widths give consecutive Linear blocks with ReLU on all but the last.
    CNN kernel sizes give Conv blocks, then a Flatten block sized to the last
    feature map, then Linear blocks over the widths after ``|``.  The first
    width after ``|`` is the flattened channel count; by default every conv
    block outputs that many channels unless ``conv_channels`` is given.
    CNN inputs default to a single-channel 28x28 image.
    """
    if not isinstance(s, str):
        raise ParseError("model string must be text", position=0)
    text = s.rstrip()
    m = _TOKEN.match(text)
    if not m:
        raise ParseError("model string must start with 'MLP ' or 'CNN '", position=0)
    kind = m.group(1)
    body = m.end()
    if body >= len(text):
        raise ParseError("missing layer list", position=body)

    if kind == "MLP":
        widths = _parse_ints(text, body, len(text), "width")
        if len(widths) < 2:
            raise ParseError("an MLP needs at least two widths", position=len(text))
        in_shape = (widths[0],) if input_shape is None else tuple(input_shape)
        blocks = [
            Linear(a, b, relu=(i < len(widths) - 2), bias=bias)
            for i, (a, b) in enumerate(zip(widths[:-1], widths[1:]))
        ]
        return ModelSpec(tuple(blocks), in_shape, sigma2, name=text.strip())

    bar = text.find("|", body)
    if bar < 0:
        raise ParseError("CNN string needs '|' between kernels and widths", position=len(text))
    kernels = _parse_ints(text, body, bar, "kernel")
    widths = _parse_ints(text, bar + 1, len(text), "width")
    if len(widths) < 2:
        raise ParseError("the MLP part of a CNN needs at least two widths", position=len(text))
    in_shape = (1, 28, 28) if input_shape is None else tuple(input_shape)
    if len(in_shape) != 3:
        raise ShapeError(f"CNN input must be (channels, height, width), got {in_shape}")
    if conv_channels is None:
        conv_channels = [widths[0]] * len(kernels)
    conv_channels = list(conv_channels)
    if len(conv_channels) != len(kernels):
        raise ShapeError(f"{len(kernels)} conv blocks but {len(conv_channels)} channel counts")
    if conv_channels[-1] != widths[0]:
        raise ShapeError(
            f"last conv block has {conv_channels[-1]} channels but the MLP part expects {widths[0]}"
        )
    blocks = []
    c, h, w = in_shape
    for ksz, oc in zip(kernels, conv_channels):
        blk = Conv(ksz, c, oc, h, w, with_pool=with_pool, with_norm=with_norm, padding=padding)
        blocks.append(blk)
        c, h, w = blk.out_shape
    if h != w:
        raise ShapeError(f"flatten needs a square feature map, got {h}x{w}")
    blocks.append(Flatten(h, c))
    blocks += [
        Linear(a, b, relu=(i < len(widths) - 2), bias=bias)
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:]))
    ]
    return ModelSpec(tuple(blocks), in_shape, sigma2, name=text.strip())


def load_model_config(path) -> ModelSpec:
    """Read a JSON model config (model_string, input_shape, conv_channels, padding, sigma2, bias)."""
    cfg = json.loads(Path(path).read_text())
    if "model_string" not in cfg:
        raise ParseError("model config lacks 'model_string'")
    return parse_model_string(
        cfg["model_string"],
        input_shape=cfg.get("input_shape"),
        conv_channels=cfg.get("conv_channels"),
        sigma2=cfg.get("sigma2", DEFAULT_SIGMA2),
        bias=bool(cfg.get("bias", False)),
        padding=int(cfg.get("padding", 0)),
    )


def param_count(spec: ModelSpec) -> int:
    return spec.d


def sample_params(spec: ModelSpec, seed: int, scheme="fan_in", theta_index: int = 0) -> ParamVector:
    """Draw one parameter point.

    ``scheme="fan_in"`` draws every weight of a block from
    ``U[-1/sqrt(fan_in), 1/sqrt(fan_in)]``; normalization scales are drawn
    from ``U[0.5, 1.5]``.  ``scheme="unit_cube"`` draws everything from
    ``U[0, 1]``.
    """
    rng = rng_for(seed, STREAM_THETA, theta_index)
    out = []
    for blk in spec.blocks:
        if scheme == "unit_cube":
            out.append(rng.uniform(0.0, 1.0, blk.n_params))
            continue
        if scheme != "fan_in":
            raise ValueError(f"unknown sampling scheme {scheme!r}")
        bound = 1.0 / np.sqrt(blk.fan_in)
        theta = rng.uniform(-bound, bound, blk.n_params)
        if isinstance(blk, Conv) and blk.with_norm:
            oc = blk.out_channels
            theta[blk.n_kernel: blk.n_kernel + oc] = rng.uniform(0.5, 1.5, oc)
        out.append(theta)
    return ParamVector(tuple(out))


def _batch(block_shape, x):
    x = np.asarray(x, dtype=np.float64)
    shape = tuple(block_shape)
    if x.shape == shape:
        return x[None], True
    if x.shape[1:] != shape:
        raise ShapeError(f"input shape {x.shape} does not match block input {shape}")
    return x, False


def block_forward(block, theta_j, x):
    """Deterministic block output ``O_j(x)``; accepts one input or a batch."""
    xb, single = _batch(block.in_shape, x)
    out, _ = block.forward(np.asarray(theta_j, dtype=np.float64), xb)
    return out[0] if single else out


@dataclass
class Trajectory:
    """Samples ``x_0..x_L`` and deterministic outputs ``o_1..o_L`` of one pass."""

    xs: list
    os: list
    mean_propagation: bool = False
    single: bool = field(default=False, repr=False)

    def block_input(self, j):
        """Input fed to block ``j`` (0-based): the previous sample, or its mean."""
        if j == 0:
            return self.xs[0]
        return self.os[j - 1] if self.mean_propagation else self.xs[j]


def forward_sample(spec: ModelSpec, theta: ParamVector, x0, seed: int, theta_index: int = 0,
                   sample_indices=None, mean_propagation=False, noise=None) -> Trajectory:
    """Sample ``x_j = O_j(x_{j-1}) + nu_j`` through every block.

    Noise for sample ``i`` at block ``j`` comes from a generator keyed by
    ``(seed, theta_index, i, j)``.  ``noise`` may instead supply standard-normal
    draws per block (arrays shaped like the block outputs); they are scaled by
    ``sqrt(sigma2)``.  With ``mean_propagation`` block ``j+1`` is fed ``o_j``
    instead of the noisy ``x_j``.
    """
    theta.check(spec)
    xb, single = _batch(spec.input_shape, x0)
    n = len(xb)
    idx = np.arange(n) if sample_indices is None else np.asarray(sample_indices)
    sd = np.sqrt(spec.sigma2)
    xs, os_ = [xb], []
    feed = xb
    for j, (blk, th) in enumerate(zip(spec.blocks, theta.slices)):
        o, _ = blk.forward(th, feed)
        if noise is not None:
            z = np.asarray(noise[j], dtype=np.float64).reshape(o.shape)
        else:
            z = np.empty_like(o)
            for r, i in enumerate(idx):
                z[r] = rng_for(seed, STREAM_NOISE, theta_index, int(i), j).standard_normal(o.shape[1:])
        x = o + sd * z
        xs.append(x)
        os_.append(o)
        feed = o if mean_propagation else x
    if single:
        xs = [a[0] for a in xs]
        os_ = [a[0] for a in os_]
    return Trajectory(xs, os_, mean_propagation, single)


def block_grad_loglik(block, theta_j, x_prev, x_j, sigma2):
    """Gradient of ``log N(x_j; O_j(x_prev), sigma2 I)`` with respect to ``theta_j``.

    Batched inputs give one gradient row per sample.
    """
    if not sigma2 > 0:
        raise InvalidVariance(f"sigma2 must be positive, got {sigma2}")
    xb, single = _batch(block.in_shape, x_prev)
    xj = np.asarray(x_j, dtype=np.float64).reshape((len(xb),) + tuple(block.out_shape))
    th = np.asarray(theta_j, dtype=np.float64)
    o, cache = block.forward(th, xb)
    g, _ = block.backward(th, cache, (xj - o) / sigma2)
    return g[0] if single else g
