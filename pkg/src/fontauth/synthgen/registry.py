"""Font registry: which fonts count as genuine, forged proxies, or held out.

The manifest is JSON:

    {"fonts": [{"id": "mono", "path": "fonts/Mono.ttf", "role": "genuine"}, ...]}

Roles partition the assets: `genuine` is the reference font set, `forged_proxy`
fonts stand in for the open-ended world of substitute fonts during training,
and `held_out` fonts are reserved for generalization testing and must never
leak into a training dataset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from fontTools.ttLib import TTFont, TTLibError

from ..errors import ConfigError, FontLoadError

ROLES = ("genuine", "forged_proxy", "held_out")
DEFAULT_ALPHABET = "0123456789"


@dataclass(frozen=True)
class FontAsset:
    id: str
    path: Path
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown font role {self.role!r}")
        if not self.id:
            raise ConfigError("font id must be non-empty")


@lru_cache(maxsize=None)
def font_codepoints(path: str) -> frozenset[int]:
    """Codepoints the font's character map covers."""
    try:
        tt = TTFont(path, fontNumber=0, lazy=True)
    except (TTLibError, OSError) as exc:
        raise FontLoadError(f"cannot load font {path}: {exc}") from exc
    try:
        cmap = tt.getBestCmap()
    finally:
        tt.close()
    return frozenset(cmap.keys())


def check_glyph_coverage(path: Path, alphabet: str) -> None:
    """Raise FontLoadError unless the font maps every alphabet character."""
    covered = font_codepoints(str(path))
    missing = [c for c in alphabet if ord(c) not in covered]
    if missing:
        raise FontLoadError(f"font {path} lacks glyphs for: {''.join(missing)}")


@dataclass(frozen=True)
class FontRegistry:
    genuine: tuple[FontAsset, ...]
    forged: tuple[FontAsset, ...]
    held_out: tuple[FontAsset, ...] = ()

    def __post_init__(self):
        ids = [a.id for a in self.all_fonts()]
        if len(ids) != len(set(ids)):
            raise ConfigError("font ids must be unique across the registry")
        if not self.genuine:
            raise ConfigError("registry needs at least one genuine font")
        for a in self.genuine:
            if a.role != "genuine":
                raise ConfigError(f"font {a.id} listed as genuine but has role {a.role}")
        for a in self.forged:
            if a.role != "forged_proxy":
                raise ConfigError(f"font {a.id} listed as forged but has role {a.role}")
        for a in self.held_out:
            if a.role != "held_out":
                raise ConfigError(f"font {a.id} listed as held_out but has role {a.role}")

    def all_fonts(self) -> tuple[FontAsset, ...]:
        return self.genuine + self.forged + self.held_out

    def validate_coverage(self, alphabet: str = DEFAULT_ALPHABET) -> None:
        for asset in self.all_fonts():
            check_glyph_coverage(asset.path, alphabet)

    def snapshot(self) -> dict:
        """Roles and ids only; paths stay out of provenance hashes."""
        return {
            "genuine": [a.id for a in self.genuine],
            "forged": [a.id for a in self.forged],
        }


def load_registry(path: str | Path, alphabet: str = DEFAULT_ALPHABET,
                  check_fonts: bool = True) -> FontRegistry:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read registry manifest {path}: {exc}") from exc
    by_role: dict[str, list[FontAsset]] = {r: [] for r in ROLES}
    for entry in manifest.get("fonts", []):
        role = entry.get("role")
        if role not in ROLES:
            raise ConfigError(f"font {entry.get('id')!r} has unknown role {role!r}")
        font_path = Path(entry["path"])
        if not font_path.is_absolute():
            font_path = path.parent / font_path
        by_role[role].append(FontAsset(id=entry["id"], path=font_path, role=role))
    registry = FontRegistry(
        genuine=tuple(by_role["genuine"]),
        forged=tuple(by_role["forged_proxy"]),
        held_out=tuple(by_role["held_out"]),
    )
    if check_fonts:
        registry.validate_coverage(alphabet)
    return registry


def save_registry(registry: FontRegistry, path: str | Path) -> None:
    entries = [{"id": a.id, "path": str(a.path), "role": a.role} for a in registry.all_fonts()]
    Path(path).write_text(json.dumps({"fonts": entries}, indent=2) + "\n", encoding="utf-8")
