"""Network container: an ordered layer stack with shape checking.

forward() validates the declared input geometry, runs the stack and
leaves per-layer caches behind for backward(). backward() returns one
gradient array per parameter array, in params() order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .layers import PARAM_DTYPE, Layer, LayerSpec, conv_output_hw, make_layer


def infer_shapes(input_shape: tuple[int, int, int], specs: list[LayerSpec]) -> list[tuple]:
    """Propagate (H, W, C) / (features,) shapes through a spec list."""
    shapes = [tuple(input_shape)]
    cur = tuple(input_shape)
    for spec in specs:
        if spec.kind == "conv2d":
            if len(cur) != 3 or cur[2] != spec.in_channels:
                raise ShapeError(f"conv2d expects HWC input with {spec.in_channels} channels, got {cur}")
            oh, ow = conv_output_hw(cur[0], cur[1], spec)
            cur = (oh, ow, spec.out_channels)
        elif spec.kind == "fully_connected":
            flat = int(np.prod(cur))
            if flat != spec.in_features:
                raise ShapeError(f"fully_connected expects {spec.in_features} features, input flattens to {flat}")
            cur = (spec.out_features,)
        # activation keeps the shape
        shapes.append(cur)
    return shapes


class Network:
    def __init__(self, input_shape: tuple[int, int, int], specs: list[LayerSpec]):
        self.input_shape = tuple(input_shape)
        self.specs = list(specs)
        self.shapes = infer_shapes(self.input_shape, self.specs)
        self.layers: list[Layer] = [make_layer(s) for s in self.specs]
        out = self.shapes[-1]
        if len(out) != 1:
            raise ShapeError(f"network must end in a vector output, got shape {out}")
        self.output_width = out[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_count(self) -> int:
        return sum(int(p.size) for p in self.params())

    def init_params(self, seed: int) -> None:
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            ps = layer.params()
            if not ps:
                continue
            w, b = ps
            spec = layer.spec
            if spec.kind == "conv2d":
                fan_in = spec.kernel_h * spec.kernel_w * spec.in_channels
                fan_out = spec.kernel_h * spec.kernel_w * spec.out_channels
            else:
                fan_in, fan_out = spec.in_features, spec.out_features
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w[...] = rng.uniform(-limit, limit, size=w.shape).astype(PARAM_DTYPE)
            b[...] = 0

    def forward(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ShapeError(f"expected batch of shape (B, {', '.join(map(str, self.input_shape))}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite activations in forward pass")
        return x

    def backward(self, grad_logits: np.ndarray) -> list[np.ndarray]:
        grads: list[np.ndarray] = []
        dy = np.asarray(grad_logits, dtype=np.float64)
        for layer in reversed(self.layers):
            dy, gs = layer.backward(dy)
            grads[:0] = gs
        return grads

    def clear_caches(self) -> None:
        for layer in self.layers:
            layer.clear_cache()

    def set_params(self, values: list[np.ndarray]) -> None:
        own = self.params()
        if len(own) != len(values):
            raise ShapeError(f"expected {len(own)} parameter arrays, got {len(values)}")
        for dst, src in zip(own, values):
            if dst.shape != src.shape:
                raise ShapeError(f"parameter shape mismatch: {dst.shape} vs {src.shape}")
            dst[...] = src.astype(PARAM_DTYPE)

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params()]

    def clone(self) -> "Network":
        other = Network(self.input_shape, self.specs)
        other.set_params(self.copy_params())
        return other
