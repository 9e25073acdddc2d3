"""Layer implementations: conv2d, fully connected, ReLU.

Layout is NHWC. Parameters live in float32 (the at-rest representation
that the model file format stores bit-exactly); all arithmetic runs in
float64 so analytic gradients survive finite-difference checks at step
1e-4. Each layer caches its last forward input and refuses backward()
without one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError

PARAM_DTYPE = np.float32


@dataclass(frozen=True)
class LayerSpec:
    """Serializable description of one layer.

    kind: "conv2d", "fully_connected" or "activation", with the fields
    the kind needs filled in and the rest left at None.
    """

    kind: str
    kernel_h: int | None = None
    kernel_w: int | None = None
    in_channels: int | None = None
    out_channels: int | None = None
    stride: int = 1
    padding: int = 0
    in_features: int | None = None
    out_features: int | None = None
    activation: str | None = None

    def __post_init__(self):
        if self.kind == "conv2d":
            if not (self.kernel_h and self.kernel_w and self.in_channels and self.out_channels):
                raise ConfigError("conv2d spec needs kernel dims and channel counts")
            if self.kernel_h < 1 or self.kernel_w < 1:
                raise ConfigError("kernel dims must be >= 1")
            if self.stride < 1:
                raise ConfigError("stride must be >= 1")
            if self.padding < 0:
                raise ConfigError("padding must be >= 0")
        elif self.kind == "fully_connected":
            if not (self.in_features and self.out_features):
                raise ConfigError("fully_connected spec needs in/out feature widths")
        elif self.kind == "activation":
            if self.activation != "relu":
                raise ConfigError(f"unsupported activation {self.activation!r}")
        else:
            raise ConfigError(f"unknown layer kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k in ("kernel_h", "kernel_w", "in_channels", "out_channels",
                  "in_features", "out_features", "activation"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        if self.kind == "conv2d":
            d["stride"] = self.stride
            d["padding"] = self.padding
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def conv_output_hw(h: int, w: int, spec: LayerSpec) -> tuple[int, int]:
    oh = (h + 2 * spec.padding - spec.kernel_h) // spec.stride + 1
    ow = (w + 2 * spec.padding - spec.kernel_w) // spec.stride + 1
    if oh < 1 or ow < 1:
        raise ConfigError(f"conv output collapses to {oh}x{ow} for input {h}x{w}")
    return oh, ow


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    # (B, oh, ow, kh, kw, C) view over the padded input, no copy
    bs, hs, ws, cs = x.strides
    shape = (x.shape[0], oh, ow, kh, kw, x.shape[3])
    strides = (bs, hs * stride, ws * stride, hs, ws, cs)
    return np.lib.stride_tricks.as_strided(x, shape=shape, strides=strides)


class Layer:
    """Common interface: forward caches, backward consumes the cache."""

    spec: LayerSpec

    def params(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        raise NotImplementedError

    def clear_cache(self) -> None:
        self._cache = None

    def _take_cache(self):
        cache = getattr(self, "_cache", None)
        if cache is None:
            raise ShapeError(f"{self.spec.kind}: backward() called without a cached forward pass")
        return cache


class Conv2D(Layer):
    def __init__(self, spec: LayerSpec):
        self.spec = spec
        k = spec
        self.weight = np.zeros((k.kernel_h, k.kernel_w, k.in_channels, k.out_channels), PARAM_DTYPE)
        self.bias = np.zeros((k.out_channels,), PARAM_DTYPE)
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        s = self.spec
        if x.ndim != 4 or x.shape[3] != s.in_channels:
            raise ShapeError(f"conv2d expects NHWC with {s.in_channels} channels, got {x.shape}")
        x = np.ascontiguousarray(x, dtype=np.float64)
        p = s.padding
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        oh, ow = conv_output_hw(x.shape[1], x.shape[2], s)
        win = _windows(xp, s.kernel_h, s.kernel_w, s.stride, oh, ow)
        y = np.einsum("bhwkli,klio->bhwo", win, self.weight.astype(np.float64), optimize=True)
        y += self.bias.astype(np.float64)
        self._cache = (xp, x.shape, oh, ow)
        return y

    def backward(self, dy):
        xp, x_shape, oh, ow = self._take_cache()
        s = self.spec
        dy = np.asarray(dy, dtype=np.float64)
        if dy.shape != (x_shape[0], oh, ow, s.out_channels):
            raise ShapeError(f"conv2d backward got grad {dy.shape}, expected {(x_shape[0], oh, ow, s.out_channels)}")
        win = _windows(xp, s.kernel_h, s.kernel_w, s.stride, oh, ow)
        dw = np.einsum("bhwkli,bhwo->klio", win, dy, optimize=True)
        db = dy.sum(axis=(0, 1, 2))
        # scatter the per-window input gradient back onto the padded input
        dwin = np.einsum("bhwo,klio->bhwkli", dy, self.weight.astype(np.float64), optimize=True)
        dxp = np.zeros_like(xp)
        st = s.stride
        for k in range(s.kernel_h):
            for l in range(s.kernel_w):
                dxp[:, k:k + st * oh:st, l:l + st * ow:st, :] += dwin[:, :, :, k, l, :]
        p = s.padding
        dx = dxp[:, p:p + x_shape[1], p:p + x_shape[2], :] if p else dxp
        return dx, [dw, db]


class FullyConnected(Layer):
    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.weight = np.zeros((spec.in_features, spec.out_features), PARAM_DTYPE)
        self.bias = np.zeros((spec.out_features,), PARAM_DTYPE)
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        flat = np.asarray(x, dtype=np.float64).reshape(x.shape[0], -1)
        if flat.shape[1] != self.spec.in_features:
            raise ShapeError(f"fully_connected expects {self.spec.in_features} features, got {flat.shape[1]}")
        self._cache = (flat, x.shape)
        return flat @ self.weight.astype(np.float64) + self.bias.astype(np.float64)

    def backward(self, dy):
        flat, x_shape = self._take_cache()
        dy = np.asarray(dy, dtype=np.float64)
        dw = flat.T @ dy
        db = dy.sum(axis=0)
        dx = (dy @ self.weight.astype(np.float64).T).reshape(x_shape)
        return dx, [dw, db]


class ReLU(Layer):
    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self._cache = None

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        mask = x > 0
        self._cache = mask
        return x * mask

    def backward(self, dy):
        mask = self._take_cache()
        return np.asarray(dy, dtype=np.float64) * mask, []


_LAYER_CLASSES = {"conv2d": Conv2D, "fully_connected": FullyConnected, "activation": ReLU}


def make_layer(spec: LayerSpec) -> Layer:
    return _LAYER_CLASSES[spec.kind](spec)
