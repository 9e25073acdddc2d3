"""Glyph datasets: balanced synthesis, binary container, PGM sidecar.

Sample images are quantized to exact 8-bit levels (k/255) the moment
they enter a dataset, which is what lets the byte-oriented container
round-trip bit-exactly against the float arrays held in memory.

Container layout ("FFDS"):

    magic "FFDS" | version u16 | M u16 | sample count u32
    | provenance_len u32 | provenance JSON (utf-8)
    | records: char u8, forged u8, font-id (u8 len + utf-8), 285 pixel bytes
    | CRC32 u32 over everything before it
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ChecksumError, EmptyFontSet, FormatError, ShapeError
from .augment import AugmentationConfig, augment
from .registry import DEFAULT_ALPHABET, FontAsset, FontRegistry
from .render import GLYPH_HEIGHT, GLYPH_WIDTH, RenderConfig, render_glyph

MAGIC = b"FFDS"
VERSION = 1
PIXELS = GLYPH_WIDTH * GLYPH_HEIGHT


def quantize(image: np.ndarray) -> np.ndarray:
    """Snap intensities to exact 8-bit levels (k/255)."""
    return np.round(np.asarray(image, dtype=np.float64) * 255.0) / 255.0


@dataclass
class GlyphSample:
    image: np.ndarray  # (19, 15) float64, values k/255
    char_index: int
    font_id: str
    forged: bool

    def __post_init__(self):
        if self.image.shape != (GLYPH_HEIGHT, GLYPH_WIDTH):
            raise ShapeError(f"sample image must be ({GLYPH_HEIGHT}, {GLYPH_WIDTH}), got {self.image.shape}")
        if self.image.min() < 0.0 or self.image.max() > 1.0:
            raise ValueError("sample intensities must lie in [0, 1]")
        if self.char_index < 0:
            raise ValueError("char_index must be >= 0")

    def __eq__(self, other):
        if not isinstance(other, GlyphSample):
            return NotImplemented
        return (self.char_index == other.char_index
                and self.font_id == other.font_id
                and self.forged == other.forged
                and np.array_equal(self.image, other.image))


@dataclass
class Dataset:
    samples: list[GlyphSample]
    alphabet_size: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.samples:
            if s.char_index >= self.alphabet_size:
                raise ValueError(f"char_index {s.char_index} >= alphabet size {self.alphabet_size}")

    def __len__(self):
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.alphabet_size == other.alphabet_size
                and self.provenance == other.provenance
                and self.samples == other.samples)

    def cell_counts(self) -> dict[tuple[int, bool], int]:
        counts: dict[tuple[int, bool], int] = {}
        for s in self.samples:
            key = (s.char_index, s.forged)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def images_array(self) -> np.ndarray:
        """(N, 19, 15, 1) batch tensor."""
        return np.stack([s.image for s in self.samples])[..., np.newaxis]


def _sample_seed(master_seed: int, char_index: int, forged: bool, k: int) -> int:
    seq = np.random.SeedSequence([master_seed, char_index, int(forged), k])
    return int(seq.generate_state(1, np.uint64)[0])


def _synthesize_cell(fonts: tuple[FontAsset, ...], char_index: int, forged: bool,
                     count: int, render_cfg: RenderConfig, aug_cfg: AugmentationConfig,
                     seed: int, alphabet: str) -> list[GlyphSample]:
    base = {f.id: render_glyph(f, char_index, render_cfg, alphabet) for f in fonts}
    out = []
    for k in range(count):
        font = fonts[k % len(fonts)]
        sub_seed = _sample_seed(seed, char_index, forged, k)
        img = augment(base[font.id], aug_cfg, sub_seed)
        out.append(GlyphSample(image=quantize(img), char_index=char_index,
                               font_id=font.id, forged=forged))
    return out


def synthesize_dataset(registry: FontRegistry, per_cell_count: int,
                       render_cfg: RenderConfig | None = None,
                       aug_cfg: AugmentationConfig | None = None,
                       seed: int = 0, alphabet: str = DEFAULT_ALPHABET) -> Dataset:
    """Balanced dataset: per_cell_count samples per (char, forged) cell.

    Genuine cells draw round-robin from the registry's genuine fonts,
    forged cells from its forged-proxy fonts. Sample order is keyed by
    (char_index, forged, sequence number) and each sample's augmentation
    seed is derived from the same key, so the result is independent of
    any evaluation schedule.
    """
    if per_cell_count < 1:
        raise ValueError("per_cell_count must be >= 1")
    if not registry.genuine:
        raise EmptyFontSet("registry has no genuine fonts")
    if not registry.forged:
        raise EmptyFontSet("registry has no forged-proxy fonts")
    render_cfg = render_cfg or RenderConfig()
    aug_cfg = aug_cfg or AugmentationConfig()

    samples: list[GlyphSample] = []
    for char_index in range(len(alphabet)):
        for forged in (False, True):
            fonts = registry.forged if forged else registry.genuine
            samples.extend(_synthesize_cell(fonts, char_index, forged, per_cell_count,
                                            render_cfg, aug_cfg, seed, alphabet))

    provenance = {
        "generator": "synthesize_dataset",
        "fonts_used": registry.snapshot(),
        "seed": seed,
        "alphabet": alphabet,
        "per_cell_count": per_cell_count,
        "render": render_cfg.to_dict(),
        "augment": aug_cfg.to_dict(),
        "augment_stack": "v1",
        "cell_counts": {f"{c}/{'forged' if f else 'genuine'}": per_cell_count
                        for c in range(len(alphabet)) for f in (False, True)},
    }
    return Dataset(samples=samples, alphabet_size=len(alphabet), provenance=provenance)


def synthesize_role_dataset(fonts: tuple[FontAsset, ...] | list[FontAsset], forged: bool,
                            per_char_count: int, render_cfg: RenderConfig | None = None,
                            aug_cfg: AugmentationConfig | None = None, seed: int = 0,
                            alphabet: str = DEFAULT_ALPHABET) -> Dataset:
    """Single-flag dataset (all genuine or all forged), e.g. a test split
    drawn from held-out fonts."""
    fonts = tuple(fonts)
    if not fonts:
        raise EmptyFontSet("no fonts supplied")
    if per_char_count < 1:
        raise ValueError("per_char_count must be >= 1")
    render_cfg = render_cfg or RenderConfig()
    aug_cfg = aug_cfg or AugmentationConfig()
    samples: list[GlyphSample] = []
    for char_index in range(len(alphabet)):
        samples.extend(_synthesize_cell(fonts, char_index, forged, per_char_count,
                                        render_cfg, aug_cfg, seed, alphabet))
    provenance = {
        "generator": "synthesize_role_dataset",
        "fonts_used": {"forged" if forged else "genuine": [f.id for f in fonts]},
        "forged": forged,
        "seed": seed,
        "alphabet": alphabet,
        "per_char_count": per_char_count,
        "render": render_cfg.to_dict(),
        "augment": aug_cfg.to_dict(),
        "augment_stack": "v1",
        "cell_counts": {f"{c}/{'forged' if forged else 'genuine'}": per_char_count
                        for c in range(len(alphabet))},
    }
    return Dataset(samples=samples, alphabet_size=len(alphabet), provenance=provenance)


def dataset_to_bytes(ds: Dataset) -> bytes:
    prov = json.dumps(ds.provenance, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    out += struct.pack("<H", ds.alphabet_size)
    out += struct.pack("<I", len(ds.samples))
    out += struct.pack("<I", len(prov))
    out += prov
    for s in ds.samples:
        fid = s.font_id.encode("utf-8")
        if len(fid) > 255:
            raise ValueError(f"font id too long to serialize: {s.font_id!r}")
        out += struct.pack("<BBB", s.char_index, int(s.forged), len(fid))
        out += fid
        out += np.round(s.image * 255.0).astype(np.uint8).tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def dataset_from_bytes(data: bytes) -> Dataset:
    if len(data) < 16 or data[:4] != MAGIC:
        raise FormatError("not a dataset file (bad magic bytes)")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported dataset format version {version}")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ChecksumError("dataset file failed CRC32 check")
    (alphabet_size,) = struct.unpack_from("<H", data, 6)
    (count,) = struct.unpack_from("<I", data, 8)
    (prov_len,) = struct.unpack_from("<I", data, 12)
    pos = 16
    provenance = json.loads(data[pos:pos + prov_len].decode("utf-8"))
    pos += prov_len
    samples = []
    for _ in range(count):
        char_index, forged, fid_len = struct.unpack_from("<BBB", data, pos)
        pos += 3
        font_id = data[pos:pos + fid_len].decode("utf-8")
        pos += fid_len
        pixels = np.frombuffer(data[pos:pos + PIXELS], dtype=np.uint8)
        pos += PIXELS
        image = pixels.reshape(GLYPH_HEIGHT, GLYPH_WIDTH).astype(np.float64) / 255.0
        samples.append(GlyphSample(image=image, char_index=char_index,
                                   font_id=font_id, forged=bool(forged)))
    if pos != len(data) - 4:
        raise FormatError("dataset payload length mismatch")
    return Dataset(samples=samples, alphabet_size=alphabet_size, provenance=provenance)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dataset_to_bytes(ds))
    tmp.replace(path)


def load_dataset(path: str | Path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())


def dataset_hash(ds: Dataset) -> str:
    return hashlib.sha256(dataset_to_bytes(ds)).hexdigest()


def export_pgm_dir(ds: Dataset, directory: str | Path) -> Path:
    """Sidecar export: one 8-bit PGM per sample plus a CSV manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_path = directory / "manifest.csv"
    with manifest_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "char", "font_id", "forged"])
        for i, s in enumerate(ds.samples):
            name = f"{i:06d}.pgm"
            pixels = np.round(s.image * 255.0).astype(np.uint8)
            header = f"P5\n{GLYPH_WIDTH} {GLYPH_HEIGHT}\n255\n".encode("ascii")
            (directory / name).write_bytes(header + pixels.tobytes())
            writer.writerow([name, s.char_index, s.font_id, int(s.forged)])
    return manifest_path


def read_pgm(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise FormatError(f"{path} is not a binary PGM file")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM is supported")
    pixels = np.frombuffer(parts[4][:width * height], dtype=np.uint8)
    if pixels.size != width * height:
        raise FormatError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).astype(np.float64) / 255.0


def import_pgm_dir(directory: str | Path, alphabet_size: int = 10) -> Dataset:
    directory = Path(directory)
    manifest_path = directory / "manifest.csv"
    if not manifest_path.exists():
        raise FormatError(f"no manifest.csv in {directory}")
    samples = []
    with manifest_path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            image = read_pgm(directory / row["path"])
            samples.append(GlyphSample(image=image, char_index=int(row["char"]),
                                       font_id=row["font_id"], forged=bool(int(row["forged"]))))
    return Dataset(samples=samples, alphabet_size=alphabet_size,
                   provenance={"generator": "import_pgm_dir", "source": str(directory)})
