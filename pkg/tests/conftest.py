"""Shared fixtures: system font registry, toy datasets, deterministic hypothesis profile."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fontauth import FontAsset, FontRegistry
from fontauth.synthgen import Dataset, GlyphSample, quantize

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# one line per acceptance criterion, echoed after the run summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

DEJAVU = Path("/usr/share/fonts/truetype/dejavu")
MPL_TTF = Path("/usr/local/lib/python3.10/dist-packages/matplotlib/mpl-data/fonts/ttf")


def _find_mpl_ttf() -> Path:
    if MPL_TTF.is_dir():
        return MPL_TTF
    try:
        import matplotlib
        return Path(matplotlib.get_data_path()) / "fonts" / "ttf"
    except ImportError:
        return MPL_TTF


_MPL = _find_mpl_ttf()

FONT_ROLES = [
    ("mono", DEJAVU / "DejaVuSansMono.ttf", "genuine"),
    ("sans", DEJAVU / "DejaVuSans.ttf", "forged_proxy"),
    ("serif", DEJAVU / "DejaVuSerif.ttf", "forged_proxy"),
    ("sans-bold", DEJAVU / "DejaVuSans-Bold.ttf", "forged_proxy"),
    ("serif-bold", DEJAVU / "DejaVuSerif-Bold.ttf", "forged_proxy"),
    ("stix", _MPL / "STIXGeneral.ttf", "forged_proxy"),
    ("cmr", _MPL / "cmr10.ttf", "forged_proxy"),
    ("cmss", _MPL / "cmss10.ttf", "forged_proxy"),
    ("stix-bold", _MPL / "STIXGeneralBol.ttf", "held_out"),
    ("cmb", _MPL / "cmb10.ttf", "held_out"),
    ("serif-italic", _MPL / "DejaVuSerif-Italic.ttf", "held_out"),
]


@pytest.fixture(scope="session")
def registry() -> FontRegistry:
    missing = [str(p) for _, p, _ in FONT_ROLES if not p.exists()]
    if missing:
        pytest.skip(f"system fonts not available: {missing}")
    by_role = {"genuine": [], "forged_proxy": [], "held_out": []}
    for font_id, path, role in FONT_ROLES:
        by_role[role].append(FontAsset(id=font_id, path=str(path), role=role))
    reg = FontRegistry(genuine=tuple(by_role["genuine"]),
                       forged=tuple(by_role["forged_proxy"]),
                       held_out=tuple(by_role["held_out"]))
    reg.validate_coverage()
    return reg


@pytest.fixture(scope="session")
def mono_font(registry) -> FontAsset:
    return registry.genuine[0]


@pytest.fixture(scope="session")
def registry_file(registry, tmp_path_factory) -> Path:
    """The registry serialized the way the command line expects it."""
    import json

    path = tmp_path_factory.mktemp("registry") / "registry.json"
    fonts = [{"id": f.id, "path": f.path, "role": f.role} for f in registry.all_fonts()]
    path.write_text(json.dumps({"fonts": fonts}, indent=2) + "\n", encoding="utf-8")
    return path


def make_toy_dataset(n_per_cell: int, alphabet_size: int = 4, seed: int = 0,
                     noise: float = 0.05) -> Dataset:
    """Synthetic, linearly separable glyphs: the character index selects a
    dark horizontal band, the forged flag lights the right edge."""
    rng = np.random.default_rng(seed)
    samples = []
    for char_index in range(alphabet_size):
        for forged in (False, True):
            for _ in range(n_per_cell):
                img = np.full((19, 15), 0.9)
                top = 1 + 4 * char_index
                img[top:top + 3, 2:13] = 0.1
                if forged:
                    img[:, 13:] = 0.0
                img += rng.uniform(-noise, noise, size=img.shape)
                samples.append(GlyphSample(image=quantize(np.clip(img, 0.0, 1.0)),
                                           char_index=char_index,
                                           font_id="toy-forged" if forged else "toy-genuine",
                                           forged=forged))
    return Dataset(samples=samples, alphabet_size=alphabet_size,
                   provenance={"generator": "make_toy_dataset", "seed": seed})


@pytest.fixture(scope="session")
def toy_train() -> Dataset:
    return make_toy_dataset(25, seed=0)


@pytest.fixture(scope="session")
def toy_val() -> Dataset:
    return make_toy_dataset(6, seed=1)
