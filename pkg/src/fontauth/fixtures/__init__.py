"""Reference evaluation counts used to regression-check the metrics
arithmetic (selfcheck and the acceptance suite load these)."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from ..metrics import BinaryCounts, ModifiedConfusionMatrix

FIXTURE_NAMES = ("idnum", "mrz")


def load_fixture(name: str) -> dict:
    """Raw fixture dict; `name` is one of FIXTURE_NAMES."""
    if name not in FIXTURE_NAMES:
        raise ValueError(f"unknown fixture {name!r}, expected one of {FIXTURE_NAMES}")
    text = resources.files(__package__).joinpath(f"reference_{name}.json").read_text("utf-8")
    return json.loads(text)


def fixture_counts(name: str, kind_key: str) -> BinaryCounts:
    """kind_key is 'multi_task' or 'binary'."""
    block = load_fixture(name)[kind_key]
    return BinaryCounts(tp=block["tp"], tn=block["tn"], fp=block["fp"], fn=block["fn"])


def fixture_matrix(name: str) -> ModifiedConfusionMatrix:
    return ModifiedConfusionMatrix(np.array(load_fixture(name)["matrix"], dtype=np.int64))
