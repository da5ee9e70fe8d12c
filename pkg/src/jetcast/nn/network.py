from __future__ import annotations

import numpy as np

from ..errors import IndexOutOfRange, NonFiniteError, ShapeMismatch
from .layers import Dense, Layer, layer_from_spec


def _check_finite(x, where):
    if not np.isfinite(x).all():
        raise NonFiniteError(f"non-finite values at {where}")


class Network:
    """A sequential stack of layers with a fixed per-sample input shape.

    ``forward`` returns the full activation trace ``[x, a_1, ..., a_L]`` so the
    same trace feeds ``backward`` and feature extraction.
    """

    def __init__(self, layers: list[Layer], input_shape, seed: int | None = None):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.seed = seed
        shape = self.input_shape
        self.shapes = [shape]
        for layer in self.layers:
            shape = layer.output_shape(shape)
            self.shapes.append(shape)
        if seed is not None:
            rng = np.random.default_rng(seed)
            for layer in self.layers:
                layer.init_params(rng)

    @property
    def output_shape(self) -> tuple:
        return self.shapes[-1]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def dense_weights(self) -> list[np.ndarray]:
        return [layer.W for layer in self.layers if isinstance(layer, Dense)]

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"batch shape {x.shape[1:]} != network input {self.input_shape}")
        _check_finite(x, "network input")
        return x

    def forward(self, x, upto: int | None = None) -> list[np.ndarray]:
        x = self._check_input(x)
        stop = len(self.layers) if upto is None else upto
        acts = [x]
        for layer in self.layers[:stop]:
            acts.append(layer.forward(acts[-1]))
        _check_finite(acts[-1], f"output of layer {stop - 1}")
        return acts

    def backward(self, acts, upstream, extra: dict | None = None, need_input_grad=False):
        """Backpropagate ``upstream`` (gradient w.r.t. the last activation).

        ``extra`` maps an activation index to an additional gradient that is
        added when the sweep reaches it (e.g. a penalty on hidden units).
        Returns ``(param_grads, input_grad)`` with ``param_grads`` aligned to
        ``self.params``.
        """
        if len(acts) != len(self.layers) + 1:
            raise ShapeMismatch("activation trace does not match this network")
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != acts[-1].shape:
            raise ShapeMismatch(f"upstream gradient {upstream.shape} != output {acts[-1].shape}")
        extra = extra or {}
        grads_rev = []
        dy = upstream
        for i in range(len(self.layers) - 1, -1, -1):
            if i + 1 in extra:
                dy = dy + extra[i + 1]
            need_dx = i > 0 or need_input_grad
            dy_next, pg = self.layers[i].backward(acts[i], acts[i + 1], dy, need_dx)
            grads_rev.append(pg)
            dy = dy_next
        grads = [g for pg in reversed(grads_rev) for g in pg]
        return grads, dy

    def predict(self, x, batch_size: int = 4096) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if len(x) <= batch_size:
            return self.forward(x)[-1]
        return np.concatenate([self.forward(x[i:i + batch_size])[-1] for i in range(0, len(x), batch_size)])

    def features(self, x, layer_index: int, batch_size: int = 4096) -> np.ndarray:
        n = len(self.layers)
        idx = layer_index + n if layer_index < 0 else layer_index
        if not 0 <= idx < n:
            raise IndexOutOfRange(f"layer index {layer_index} outside 0..{n - 1}")
        x = np.asarray(x, dtype=np.float64)
        chunks = [self.forward(x[i:i + batch_size], upto=idx + 1)[-1] for i in range(0, max(len(x), 1), batch_size)]
        out = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
        return out.reshape(len(out), -1)

    def copy(self) -> "Network":
        clone = Network([layer_from_spec(l.spec()) for l in self.layers], self.input_shape, None)
        clone.seed = self.seed
        for dst, src in zip(clone.params, self.params):
            dst[...] = src
        return clone

    def spec(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "seed": self.seed,
            "layers": [layer.spec() for layer in self.layers],
        }

    @classmethod
    def from_spec(cls, spec: dict, params=None) -> "Network":
        net = cls([layer_from_spec(s) for s in spec["layers"]], spec["input_shape"], None)
        net.seed = spec.get("seed")
        if params is not None:
            params = list(params)
            if len(params) != len(net.params):
                raise ShapeMismatch(f"expected {len(net.params)} parameter arrays, got {len(params)}")
            for dst, src in zip(net.params, params):
                if dst.shape != np.shape(src):
                    raise ShapeMismatch(f"parameter shape {np.shape(src)} != {dst.shape}")
                dst[...] = src
        return net

    def __repr__(self):
        body = ", ".join(repr(l) for l in self.layers)
        return f"Network(input={self.input_shape}, [{body}])"


def forward(net: Network, batch) -> list[np.ndarray]:
    return net.forward(batch)


def backward(net: Network, activations, upstream_grad, extra=None):
    return net.backward(activations, upstream_grad, extra, need_input_grad=True)


def extract_features(net: Network, batch, layer_index: int) -> np.ndarray:
    """Flattened output of layer ``layer_index`` (0-based, negatives count from the end)."""
    return net.features(batch, layer_index)
