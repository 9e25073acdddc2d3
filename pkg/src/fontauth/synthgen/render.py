"""Glyph rasterization to the fixed 15x19 input geometry.

A glyph is rendered with FreeType (via Pillow) at the largest point size
whose ink bounding box still fits inside the canvas minus the margin,
found by binary search, then centered. Output intensities are exact
multiples of 1/255 so datasets survive the 8-bit on-disk quantization
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from PIL import Image, ImageFont

from ..errors import ConfigError, FontLoadError, MissingGlyph
from .registry import FontAsset, font_codepoints

GLYPH_WIDTH = 15
GLYPH_HEIGHT = 19


@dataclass(frozen=True)
class RenderConfig:
    width: int = GLYPH_WIDTH
    height: int = GLYPH_HEIGHT
    min_point_size: int = 4
    max_point_size: int = 48
    padding: int = 1
    dark_on_light: bool = True
    antialias: bool = True

    def __post_init__(self):
        if self.width != GLYPH_WIDTH or self.height != GLYPH_HEIGHT:
            raise ConfigError(f"glyph geometry is fixed at {GLYPH_WIDTH}x{GLYPH_HEIGHT}, "
                              f"got {self.width}x{self.height}")
        if self.padding < 0:
            raise ConfigError("padding must be >= 0")
        if not (1 <= self.min_point_size <= self.max_point_size):
            raise ConfigError("point size search range must satisfy 1 <= min <= max")

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height,
            "min_point_size": self.min_point_size, "max_point_size": self.max_point_size,
            "padding": self.padding, "dark_on_light": self.dark_on_light,
            "antialias": self.antialias,
        }


@lru_cache(maxsize=256)
def _load_face(path: str, point_size: int) -> ImageFont.FreeTypeFont:
    try:
        return ImageFont.truetype(path, point_size)
    except OSError as exc:
        raise FontLoadError(f"cannot load font {path}: {exc}") from exc


def _ink_array(font_path: str, char: str, point_size: int, antialias: bool) -> np.ndarray | None:
    """Tight ink-coverage array (uint8) for one glyph, or None if blank."""
    face = _load_face(font_path, point_size)
    mask = face.getmask(char, mode="L" if antialias else "1")
    if mask.size[0] == 0 or mask.size[1] == 0:
        return None
    img = Image.frombytes("L", mask.size, bytes(mask))
    arr = np.asarray(img, dtype=np.uint8)
    rows = np.flatnonzero(arr.any(axis=1))
    cols = np.flatnonzero(arr.any(axis=0))
    if rows.size == 0 or cols.size == 0:
        return None
    return arr[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]


def render_glyph(font: FontAsset, char_index: int, cfg: RenderConfig,
                 alphabet: str = "0123456789") -> np.ndarray:
    """Render alphabet[char_index] from `font` into a (19, 15) float array."""
    if not (0 <= char_index < len(alphabet)):
        raise ConfigError(f"char_index {char_index} out of range for alphabet of {len(alphabet)}")
    char = alphabet[char_index]
    if ord(char) not in font_codepoints(str(font.path)):
        raise MissingGlyph(f"font {font.id} has no glyph for {char!r}")

    box_h = cfg.height - 2 * cfg.padding
    box_w = cfg.width - 2 * cfg.padding

    def fits(size: int) -> bool:
        ink = _ink_array(str(font.path), char, size, cfg.antialias)
        return ink is not None and ink.shape[0] <= box_h and ink.shape[1] <= box_w

    # binary search the largest fitting point size
    lo, hi = cfg.min_point_size, cfg.max_point_size
    if not fits(lo):
        raise MissingGlyph(f"font {font.id} renders no usable ink for {char!r} "
                           f"at {lo}pt (glyph too large or blank)")
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1

    ink = _ink_array(str(font.path), char, lo, cfg.antialias)
    h, w = ink.shape
    if max(h, w) < 0.5 * min(cfg.width, cfg.height):
        raise MissingGlyph(f"font {font.id} glyph for {char!r} is degenerate "
                           f"({w}x{h} ink at best fitting size)")
    canvas = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
    top = (cfg.height - h) // 2
    left = (cfg.width - w) // 2
    canvas[top:top + h, left:left + w] = ink

    if cfg.dark_on_light:
        canvas = 255 - canvas
    return canvas.astype(np.float64) / 255.0
