"""Capture-like augmentation for 15x19 glyph images.

Fixed stage order, each stage gated by its own application probability
and skipped outright whenever its drawn parameters would be a no-op (so
the all-zero-magnitude config is a bitwise identity):

    1. projective corner jitter
    2. downscale/upscale round trip (low-dpi capture simulation)
    3. Gaussian blur
    4. additive Gaussian noise
    5. brightness / contrast jitter

All randomness comes from one numpy Generator seeded by the caller, so
the transform is a pure function of (image, config, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from ..errors import ConfigError, ShapeError
from .render import GLYPH_HEIGHT, GLYPH_WIDTH


def _check_range(name: str, rng: tuple[float, float], lo_min: float, hi_max: float) -> None:
    lo, hi = rng
    if not (lo_min <= lo <= hi <= hi_max):
        raise ConfigError(f"{name} range {rng} must satisfy {lo_min} <= lo <= hi <= {hi_max}")


@dataclass(frozen=True)
class AugmentationConfig:
    corner_jitter_px: float = 2.0
    rescale_range: tuple[float, float] = (0.5, 0.8)
    blur_sigma_range: tuple[float, float] = (0.0, 1.0)
    noise_sigma_range: tuple[float, float] = (0.0, 0.08)
    brightness_range: tuple[float, float] = (-0.15, 0.15)
    contrast_range: tuple[float, float] = (-0.15, 0.15)
    projective_prob: float = 1.0
    rescale_prob: float = 1.0
    blur_prob: float = 1.0
    noise_prob: float = 1.0
    color_prob: float = 1.0

    def __post_init__(self):
        if self.corner_jitter_px < 0:
            raise ConfigError("corner jitter must be >= 0")
        _check_range("rescale", self.rescale_range, 0.05, 1.0)
        _check_range("blur sigma", self.blur_sigma_range, 0.0, 10.0)
        _check_range("noise sigma", self.noise_sigma_range, 0.0, 2.0)
        _check_range("brightness", self.brightness_range, -1.0, 1.0)
        _check_range("contrast", self.contrast_range, -1.0, 1.0)
        for name in ("projective_prob", "rescale_prob", "blur_prob", "noise_prob", "color_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1]")

    @classmethod
    def identity(cls) -> "AugmentationConfig":
        return cls(corner_jitter_px=0.0, rescale_range=(1.0, 1.0),
                   blur_sigma_range=(0.0, 0.0), noise_sigma_range=(0.0, 0.0),
                   brightness_range=(0.0, 0.0), contrast_range=(0.0, 0.0))

    def to_dict(self) -> dict:
        return {
            "corner_jitter_px": self.corner_jitter_px,
            "rescale_range": list(self.rescale_range),
            "blur_sigma_range": list(self.blur_sigma_range),
            "noise_sigma_range": list(self.noise_sigma_range),
            "brightness_range": list(self.brightness_range),
            "contrast_range": list(self.contrast_range),
            "probs": [self.projective_prob, self.rescale_prob, self.blur_prob,
                      self.noise_prob, self.color_prob],
        }


def _solve_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 map with H @ (x, y, 1) ~ dst for each of the four src corners."""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    h = np.linalg.solve(a, b)
    return np.append(h, 1.0).reshape(3, 3)


def _projective(img: np.ndarray, jitter: float, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape
    corners = np.array([[0, 0], [w - 1, 0], [0, h - 1], [w - 1, h - 1]], dtype=np.float64)
    jittered = corners + rng.uniform(-jitter, jitter, size=(4, 2))
    hom = _solve_homography(corners, jittered)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    denom = hom[2, 0] * xs + hom[2, 1] * ys + hom[2, 2]
    u = (hom[0, 0] * xs + hom[0, 1] * ys + hom[0, 2]) / denom
    v = (hom[1, 0] * xs + hom[1, 1] * ys + hom[1, 2]) / denom
    return ndimage.map_coordinates(img, [v, u], order=1, mode="nearest")


def _rescale_roundtrip(img: np.ndarray, factor: float) -> np.ndarray:
    h, w = img.shape
    small_w = max(1, round(w * factor))
    small_h = max(1, round(h * factor))
    pic = Image.fromarray(img.astype(np.float32), mode="F")
    pic = pic.resize((small_w, small_h), Image.BILINEAR)
    pic = pic.resize((w, h), Image.BILINEAR)
    return np.asarray(pic, dtype=np.float64)


def augment(image: np.ndarray, cfg: AugmentationConfig, seed: int) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.shape != (GLYPH_HEIGHT, GLYPH_WIDTH):
        raise ShapeError(f"augment expects ({GLYPH_HEIGHT}, {GLYPH_WIDTH}) images, got {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("augment expects intensities in [0, 1]")
    rng = np.random.default_rng(seed)

    if cfg.projective_prob > 0 and rng.random() < cfg.projective_prob and cfg.corner_jitter_px > 0:
        img = _projective(img, cfg.corner_jitter_px, rng)

    if cfg.rescale_prob > 0 and rng.random() < cfg.rescale_prob:
        factor = rng.uniform(*cfg.rescale_range)
        if factor != 1.0:
            img = _rescale_roundtrip(img, factor)

    if cfg.blur_prob > 0 and rng.random() < cfg.blur_prob:
        sigma = rng.uniform(*cfg.blur_sigma_range)
        if sigma > 0:
            img = ndimage.gaussian_filter(img, sigma, mode="nearest")

    if cfg.noise_prob > 0 and rng.random() < cfg.noise_prob:
        sigma = rng.uniform(*cfg.noise_sigma_range)
        if sigma > 0:
            img = img + rng.normal(0.0, sigma, size=img.shape)

    if cfg.color_prob > 0 and rng.random() < cfg.color_prob:
        contrast = rng.uniform(*cfg.contrast_range)
        brightness = rng.uniform(*cfg.brightness_range)
        if contrast != 0.0:
            img = 0.5 + (1.0 + contrast) * (img - 0.5)
        if brightness != 0.0:
            img = img + brightness

    return np.clip(img, 0.0, 1.0)
