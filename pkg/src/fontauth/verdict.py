"""Field-level authenticity verdict over a character sequence.

Three steps: (1) a plain character recognizer reads every symbol and its
confidence sets the symbol's weight, (2) the multi-task authenticity
classifier re-reads each symbol and a symbol is flagged when it reports a
forged font or disagrees with step 1 about the character, (3) the
weighted fraction of flagged symbols against a threshold decides the
field. Characters whose glyphs carry few font cues can be down-weighted
through a per-class reliability table derived from a validation run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import ClassifierKind, TrainedModel, predict
from .errors import CodecError
from .metrics import ModifiedConfusionMatrix

DEFAULT_THRESHOLD = 0.2
RELIABILITY_FLOOR = 0.05


@dataclass(frozen=True)
class SymbolAssessment:
    position: int
    std_char: int
    std_confidence: float
    auth_char: int | None
    auth_forged: bool
    flagged: bool
    weight: float

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "std_char": self.std_char,
            "std_confidence": self.std_confidence,
            "auth_char": self.auth_char,
            "auth_forged": self.auth_forged,
            "flagged": self.flagged,
            "weight": self.weight,
        }


@dataclass(frozen=True)
class FieldVerdict:
    assessments: tuple[SymbolAssessment, ...]
    flagged_weight_fraction: float
    verdict: str  # "genuine" | "forged"
    threshold: float
    weights_degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "flagged_weight_fraction": self.flagged_weight_fraction,
            "threshold": self.threshold,
            "weights_degenerate": self.weights_degenerate,
            "symbols": [a.to_dict() for a in self.assessments],
        }


def build_reliability_table(matrix: ModifiedConfusionMatrix,
                            floor: float = RELIABILITY_FLOOR) -> np.ndarray:
    """Per-class font recall from a validation matrix, clamped to [floor, 1].

    Classes with an empty column fall back to the floor (nothing is known
    about them, so they should barely move the verdict)."""
    table = np.empty(matrix.num_classes, dtype=np.float64)
    for c in range(matrix.num_classes):
        if matrix.column_sum(c) == 0:
            table[c] = floor
        else:
            table[c] = min(1.0, max(floor, float(matrix.font_recall(c))))
    return table


def low_recall_classes(matrix: ModifiedConfusionMatrix, recall_floor: float = 0.5) -> frozenset[int]:
    """Classes whose font recall falls below the floor; callers may treat
    these as always-flagged, mirroring the force-forged analysis."""
    out = set()
    for c in range(matrix.num_classes):
        if matrix.column_sum(c) > 0 and float(matrix.font_recall(c)) < recall_floor:
            out.add(c)
    return frozenset(out)


def assess_symbol(std_model: TrainedModel, auth_model: TrainedModel, image: np.ndarray,
                  position: int = 0, reliability: np.ndarray | None = None,
                  force_flag_classes: frozenset[int] | None = None) -> SymbolAssessment:
    if std_model.kind is not ClassifierKind.CHAR_ONLY:
        raise CodecError("std_model must be a char-only recognizer")
    if auth_model.kind is not ClassifierKind.MULTI_TASK:
        raise CodecError("auth_model must be a multi-task classifier")
    if std_model.m != auth_model.m:
        raise CodecError("models disagree on alphabet size")
    if reliability is not None and len(reliability) != std_model.m:
        raise CodecError("reliability table length must equal the alphabet size")

    std_pred = predict(std_model, image)
    auth_pred = predict(auth_model, image)

    flagged = auth_pred.forged or (auth_pred.char_index is not None
                                   and auth_pred.char_index != std_pred.char_index)
    if force_flag_classes and std_pred.char_index in force_flag_classes:
        flagged = True

    rel = 1.0 if reliability is None else float(reliability[std_pred.char_index])
    return SymbolAssessment(
        position=position,
        std_char=std_pred.char_index,
        std_confidence=std_pred.confidence,
        auth_char=auth_pred.char_index,
        auth_forged=auth_pred.forged,
        flagged=flagged,
        weight=std_pred.confidence * rel,
    )


def assess_field(std_model: TrainedModel, auth_model: TrainedModel, images,
                 reliability: np.ndarray | None = None,
                 force_flag_classes: frozenset[int] | None = None) -> list[SymbolAssessment]:
    return [assess_symbol(std_model, auth_model, img, position=i, reliability=reliability,
                          force_flag_classes=force_flag_classes)
            for i, img in enumerate(images)]


def field_verdict(assessments, threshold: float = DEFAULT_THRESHOLD) -> FieldVerdict:
    assessments = tuple(assessments)
    if not assessments:
        raise ValueError("cannot judge an empty symbol sequence")
    if not (0.0 <= threshold < 1.0):
        raise ValueError("threshold must lie in [0, 1)")
    weights = np.array([a.weight for a in assessments], dtype=np.float64)
    flags = np.array([a.flagged for a in assessments], dtype=np.float64)
    if (weights < 0).any():
        raise ValueError("weights must be non-negative")
    total = float(weights.sum())
    degenerate = total == 0.0
    if degenerate:
        fraction = float(flags.mean())
    else:
        fraction = float((weights * flags).sum() / total)
    return FieldVerdict(
        assessments=assessments,
        flagged_weight_fraction=fraction,
        verdict="forged" if fraction > threshold else "genuine",
        threshold=threshold,
        weights_degenerate=degenerate,
    )
