"""Differentiable layers operating on float64 batches.

Image-like tensors use channels-last layout ``(batch, height, width, channels)``.
Every layer implements ``forward(x)`` and ``backward(x, y, dy)``; the latter
returns ``(dx, param_grads)`` with ``param_grads`` aligned to ``params``.
Layers keep no per-call state, so a forward trace can be replayed freely.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


class Layer:
    kind = "Layer"
    params: list[np.ndarray] = []

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, x, y, dy, need_dx=True):
        raise NotImplementedError

    def spec(self) -> dict:
        return {"type": self.kind}

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.spec().items() if k != "type")
        return f"{self.kind}({args})"


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _pad2(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    out = np.zeros((x.shape[0], x.shape[1] + 2 * ph, x.shape[2] + 2 * pw, x.shape[3]))
    out[:, ph:ph + x.shape[1], pw:pw + x.shape[2], :] = x
    return out


def _pad(x, p):
    return _pad2(x, p, p)


def _gather(xp, kh, kw, stride, ho, wo):
    """Stack the ``kh*kw`` shifted (and strided) views along the channel axis."""
    s = stride
    return np.concatenate(
        [xp[:, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s, :] for i in range(kh) for j in range(kw)],
        axis=-1,
    )


class Dense(Layer):
    kind = "Dense"

    def __init__(self, n_in: int, n_out: int):
        if n_in < 1 or n_out < 1:
            raise ValueError("Dense extents must be >= 1")
        self.n_in, self.n_out = int(n_in), int(n_out)
        self.W = np.zeros((self.n_in, self.n_out))
        self.b = np.zeros(self.n_out)
        self.params = [self.W, self.b]

    def init_params(self, rng):
        self.W[...] = _glorot(rng, self.W.shape, self.n_in, self.n_out)
        self.b[...] = 0.0

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.n_in,):
            raise ShapeMismatch(f"Dense expects ({self.n_in},), got {tuple(in_shape)}")
        return (self.n_out,)

    def forward(self, x):
        out = x @ self.W
        out += self.b
        return out

    def backward(self, x, y, dy, need_dx=True):
        dW = x.T @ dy
        db = dy.sum(axis=0)
        dx = dy @ self.W.T if need_dx else None
        return dx, [dW, db]

    def spec(self):
        return {"type": self.kind, "in": self.n_in, "out": self.n_out}


class Conv2D(Layer):
    """2-D cross-correlation with zero padding, weights ``(kh, kw, c_in, c_out)``."""

    kind = "Conv2D"

    def __init__(self, in_channels, out_channels, kernel_h=3, kernel_w=3, stride=1, padding=0):
        if min(in_channels, out_channels, kernel_h, kernel_w, stride) < 1 or padding < 0:
            raise ValueError("Conv2D extents and stride must be >= 1, padding >= 0")
        self.in_channels, self.out_channels = int(in_channels), int(out_channels)
        self.kernel_h, self.kernel_w = int(kernel_h), int(kernel_w)
        self.stride, self.padding = int(stride), int(padding)
        self.W = np.zeros((self.kernel_h, self.kernel_w, self.in_channels, self.out_channels))
        self.b = np.zeros(self.out_channels)
        self.params = [self.W, self.b]

    def init_params(self, rng):
        area = self.kernel_h * self.kernel_w
        self.W[...] = _glorot(rng, self.W.shape, area * self.in_channels, area * self.out_channels)
        self.b[...] = 0.0

    def output_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[2] != self.in_channels:
            raise ShapeMismatch(f"Conv2D expects (H, W, {self.in_channels}), got {tuple(in_shape)}")
        h, w, _ = in_shape
        ho = (h + 2 * self.padding - self.kernel_h) // self.stride + 1
        wo = (w + 2 * self.padding - self.kernel_w) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"Conv2D kernel larger than padded input {tuple(in_shape)}")
        return (ho, wo, self.out_channels)

    def _columns(self, x):
        """im2col with columns ordered ``(kh, kw, c)`` to match ``W.reshape(-1, c_out)``."""
        ho, wo, _ = self.output_shape(x.shape[1:])
        cols = _gather(_pad(x, self.padding), self.kernel_h, self.kernel_w, self.stride, ho, wo)
        return cols.reshape(len(x) * ho * wo, -1), (len(x), ho, wo)

    def forward(self, x):
        cols, (m, ho, wo) = self._columns(x)
        out = cols @ self.W.reshape(-1, self.out_channels) + self.b
        return out.reshape(m, ho, wo, self.out_channels)

    def backward(self, x, y, dy, need_dx=True):
        cols, (m, ho, wo) = self._columns(x)
        dy2 = dy.reshape(-1, self.out_channels)
        dW = (cols.T @ dy2).reshape(self.W.shape)
        db = dy2.sum(axis=0)
        if not need_dx:
            return None, [dW, db]
        kh, kw, p, s = self.kernel_h, self.kernel_w, self.padding, self.stride
        h, w = x.shape[1:3]
        if s == 1 and p <= min(kh, kw) - 1:
            # full correlation of dy with the flipped kernel, cropped to the input
            dyp = _pad2(dy, kh - 1 - p, kw - 1 - p)
            wf = self.W[::-1, ::-1].transpose(0, 1, 3, 2).reshape(-1, self.in_channels)
            dcols = _gather(dyp, kh, kw, 1, h, w).reshape(m * h * w, -1)
            return (dcols @ wf).reshape(m, h, w, self.in_channels), [dW, db]
        dcols = (dy2 @ self.W.reshape(-1, self.out_channels).T).reshape(m, ho, wo, kh, kw, self.in_channels)
        dxp = np.zeros((m, h + 2 * p, w + 2 * p, self.in_channels))
        for i in range(kh):
            for j in range(kw):
                dxp[:, i:i + s * ho:s, j:j + s * wo:s, :] += dcols[:, :, :, i, j, :]
        return dxp[:, p:h + p, p:w + p, :], [dW, db]

    def spec(self):
        return {
            "type": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_h": self.kernel_h,
            "kernel_w": self.kernel_w,
            "stride": self.stride,
            "padding": self.padding,
        }


class MaxPool(Layer):
    kind = "MaxPool"

    def __init__(self, h=2, w=2, stride=2):
        if min(h, w, stride) < 1:
            raise ValueError("MaxPool extents and stride must be >= 1")
        self.h, self.w, self.stride = int(h), int(w), int(stride)

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"MaxPool expects (H, W, C), got {tuple(in_shape)}")
        ho = (in_shape[0] - self.h) // self.stride + 1
        wo = (in_shape[1] - self.w) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"MaxPool window larger than input {tuple(in_shape)}")
        return (ho, wo, in_shape[2])

    def _windows(self, x):
        s = self.stride
        win = sliding_window_view(x, (self.h, self.w), axis=(1, 2))[:, ::s, ::s]
        return win.reshape(win.shape[:4] + (self.h * self.w,))  # (m, ho, wo, c, h*w)

    def _offsets(self, x):
        """Strided views, one per window position, in row-major window order."""
        ho, wo, _ = self.output_shape(x.shape[1:])
        s = self.stride
        return [x[:, i:i + s * ho:s, j:j + s * wo:s, :] for i in range(self.h) for j in range(self.w)]

    def forward(self, x):
        views = self._offsets(x)
        out = views[0].copy()
        for v in views[1:]:
            np.maximum(out, v, out=out)
        return out

    def backward(self, x, y, dy, need_dx=True):
        if not need_dx:
            return None, []
        ho, wo = y.shape[1:3]
        s = self.stride
        dx = np.zeros_like(x)
        taken = np.zeros(y.shape, dtype=bool)
        # the first maximal position in each window receives the gradient
        for k, v in enumerate(self._offsets(x)):
            i, j = divmod(k, self.w)
            sel = (v == y) & ~taken
            taken |= sel
            dx[:, i:i + s * ho:s, j:j + s * wo:s, :] += dy * sel
        return dx, []

    def spec(self):
        return {"type": self.kind, "h": self.h, "w": self.w, "stride": self.stride}


class ReLU(Layer):
    kind = "ReLU"

    def forward(self, x):
        return np.maximum(x, 0.0)

    def backward(self, x, y, dy, need_dx=True):
        return (np.where(x > 0, dy, 0.0) if need_dx else None), []


class Sigmoid(Layer):
    kind = "Sigmoid"

    def forward(self, x):
        # tanh form never overflows
        out = np.multiply(x, 0.5)
        np.tanh(out, out=out)
        out += 1.0
        out *= 0.5
        return out

    def backward(self, x, y, dy, need_dx=True):
        if not need_dx:
            return None, []
        g = np.subtract(1.0, y)
        g *= y
        g *= dy
        return g, []


class Tanh(Layer):
    kind = "Tanh"

    def forward(self, x):
        return np.tanh(x)

    def backward(self, x, y, dy, need_dx=True):
        return (dy * (1.0 - y * y) if need_dx else None), []


class Flatten(Layer):
    kind = "Flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(len(x), -1)

    def backward(self, x, y, dy, need_dx=True):
        return (dy.reshape(x.shape) if need_dx else None), []


LAYER_TYPES = {cls.kind: cls for cls in (Dense, Conv2D, MaxPool, ReLU, Sigmoid, Tanh, Flatten)}


def layer_from_spec(spec: dict) -> Layer:
    spec = dict(spec)
    kind = spec.pop("type")
    if kind == "Dense":
        return Dense(spec["in"], spec["out"])
    try:
        cls = LAYER_TYPES[kind]
    except KeyError:
        raise ValueError(f"unknown layer type {kind!r}") from None
    return cls(**spec)
