"""Synthetic glyph dataset generation from vector fonts."""

from .augment import AugmentationConfig, augment
from .dataset import (
    Dataset,
    GlyphSample,
    dataset_from_bytes,
    dataset_hash,
    dataset_to_bytes,
    export_pgm_dir,
    import_pgm_dir,
    load_dataset,
    quantize,
    read_pgm,
    save_dataset,
    synthesize_dataset,
    synthesize_role_dataset,
)
from .registry import DEFAULT_ALPHABET, FontAsset, FontRegistry, load_registry, save_registry
from .render import GLYPH_HEIGHT, GLYPH_WIDTH, RenderConfig, render_glyph

__all__ = [
    "AugmentationConfig", "augment",
    "Dataset", "GlyphSample", "dataset_from_bytes", "dataset_hash", "dataset_to_bytes",
    "export_pgm_dir", "import_pgm_dir", "load_dataset", "quantize", "read_pgm", "save_dataset",
    "synthesize_dataset", "synthesize_role_dataset",
    "DEFAULT_ALPHABET", "FontAsset", "FontRegistry", "load_registry", "save_registry",
    "GLYPH_HEIGHT", "GLYPH_WIDTH", "RenderConfig", "render_glyph",
]
