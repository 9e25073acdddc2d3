"""Evaluation protocol: font sensitivity/specificity, the per-class
four-way result breakdown for forged samples, and the exclusion /
force-forged sensitivity analyses.

Forged is the positive class throughout. For a forged-truth sample the
joint (font decision, character decision) outcome falls into one of four
result types; types 1 and 2 (font called forged) count as true positives
regardless of the character decision.

Percentages are displayed with two decimals, rounded half-up; that rule
reproduces every reference percentage shipped in the fixtures, whereas
truncation does not (90.765% must display as 90.77).
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .classifier import ClassifierKind, Prediction, TrainedModel, predict_batch
from .errors import CodecError, MetricError
from .synthgen.dataset import Dataset, GlyphSample, dataset_hash

SCHEMA_VERSION = 1


def format_percent(value, digits: int = 2) -> str:
    """Half-up fixed-point percentage for a fraction in [0, 1]."""
    if isinstance(value, Fraction):
        dec = Decimal(value.numerator * 100) / Decimal(value.denominator)
    else:
        dec = Decimal(repr(float(value) * 100))
    quantum = Decimal(1).scaleb(-digits)
    return str(dec.quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class BinaryCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "BinaryCounts") -> "BinaryCounts":
        return BinaryCounts(self.tp + other.tp, self.tn + other.tn,
                            self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def sensitivity(self) -> Fraction:
        if self.tp + self.fn == 0:
            raise MetricError("sensitivity undefined: no positive samples")
        return Fraction(self.tp, self.tp + self.fn)

    def specificity(self) -> Fraction:
        if self.tn + self.fp == 0:
            raise MetricError("specificity undefined: no negative samples")
        return Fraction(self.tn, self.tn + self.fp)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}

    @classmethod
    def from_dict(cls, d: dict) -> "BinaryCounts":
        return cls(tp=d["tp"], tn=d["tn"], fp=d["fp"], fn=d["fn"])


class ResultType(enum.Enum):
    """Joint outcome for one evaluated sample."""

    TYPE1 = 1  # forged truth: font correct, character correct
    TYPE2 = 2  # forged truth: font correct, character wrong
    TYPE3 = 3  # forged truth: font wrong, character correct
    TYPE4 = 4  # forged truth: font wrong, character wrong
    TN = "tn"  # genuine truth, called genuine
    FP = "fp"  # genuine truth, called forged

    @property
    def is_true_positive(self) -> bool:
        return self in (ResultType.TYPE1, ResultType.TYPE2)


def classify_result_type(prediction: Prediction, truth: GlyphSample) -> ResultType:
    if not truth.forged:
        return ResultType.FP if prediction.forged else ResultType.TN
    if prediction.char_index is None:
        raise CodecError("four-way result types need a character prediction "
                         "(multi-task classifier output)")
    font_correct = prediction.forged
    char_correct = prediction.char_index == truth.char_index
    if font_correct:
        return ResultType.TYPE1 if char_correct else ResultType.TYPE2
    return ResultType.TYPE3 if char_correct else ResultType.TYPE4


@dataclass
class ModifiedConfusionMatrix:
    """4 result-type rows x M forged-character-class columns."""

    counts: np.ndarray  # shape (4, M), non-negative ints

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != 4:
            raise ValueError(f"matrix must be (4, M), got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("matrix counts must be non-negative")

    def __eq__(self, other):
        if not isinstance(other, ModifiedConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[1]

    def column_sum(self, char_class: int) -> int:
        return int(self.counts[:, char_class].sum())

    def tp(self) -> int:
        return int(self.counts[0:2].sum())

    def fn(self) -> int:
        return int(self.counts[2:4].sum())

    def font_recall(self, char_class: int) -> Fraction:
        col = self.counts[:, char_class]
        total = int(col.sum())
        if total == 0:
            raise MetricError(f"class {char_class} has no forged samples")
        return Fraction(int(col[0] + col[1]), total)

    def font_miss_rate(self, char_class: int) -> Fraction:
        return 1 - self.font_recall(char_class)

    def add_result(self, result: ResultType, char_class: int) -> None:
        self.counts[result.value - 1, char_class] += 1

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()


def _check_subset(classes, m: int, name: str) -> frozenset[int]:
    classes = frozenset(int(c) for c in classes)
    bad = [c for c in classes if not (0 <= c < m)]
    if bad:
        raise ValueError(f"{name} contains out-of-range classes {bad} for M={m}")
    return classes


def exclusion_sensitivity(matrix: ModifiedConfusionMatrix, excluded) -> Fraction:
    """Sensitivity after dropping the excluded character classes entirely."""
    excluded = _check_subset(excluded, matrix.num_classes, "excluded")
    keep = [c for c in range(matrix.num_classes) if c not in excluded]
    if not keep:
        raise MetricError("cannot exclude every character class")
    kept = matrix.counts[:, keep]
    tp = int(kept[0:2].sum())
    fn = int(kept[2:4].sum())
    if tp + fn == 0:
        raise MetricError("no forged samples remain after exclusion")
    return Fraction(tp, tp + fn)


def force_forged_sensitivity(matrix: ModifiedConfusionMatrix, base: BinaryCounts | None,
                             forced) -> Fraction:
    """Sensitivity when every forged sample of a forced class counts as a
    true positive regardless of the prediction."""
    forced = _check_subset(forced, matrix.num_classes, "forced")
    if base is not None and (base.tp != matrix.tp() or base.fn != matrix.fn()):
        raise ValueError("base counts disagree with the matrix totals")
    tp = 0
    fn = 0
    for c in range(matrix.num_classes):
        col = matrix.counts[:, c]
        if c in forced:
            tp += int(col.sum())
        else:
            tp += int(col[0] + col[1])
            fn += int(col[2] + col[3])
    if tp + fn == 0:
        raise MetricError("no forged samples in the matrix")
    return Fraction(tp, tp + fn)


def rank_font_miss_rates(matrix: ModifiedConfusionMatrix) -> list[tuple[int, Fraction]]:
    """Classes ordered by decreasing font-misclassification rate."""
    rates = [(c, matrix.font_miss_rate(c)) for c in range(matrix.num_classes)]
    return sorted(rates, key=lambda pair: (-pair[1], pair[0]))


@dataclass
class EvalReport:
    per_set: dict[str, BinaryCounts]
    overall: BinaryCounts
    matrix: ModifiedConfusionMatrix | None = None
    provenance: dict = field(default_factory=dict)

    def sensitivity(self) -> Fraction:
        return self.overall.sensitivity()

    def specificity(self) -> Fraction:
        return self.overall.specificity()

    def validate(self) -> None:
        total = BinaryCounts()
        for counts in self.per_set.values():
            total = total + counts
        if total != self.overall:
            raise ValueError("per-set counts do not sum to the overall counts")
        if self.matrix is not None:
            if self.matrix.tp() != self.overall.tp or self.matrix.fn() != self.overall.fn:
                raise ValueError("matrix row sums disagree with the binary counts")


def _iter_chunks(ds: Dataset, size: int = 512):
    for start in range(0, len(ds.samples), size):
        chunk = ds.samples[start:start + size]
        batch = np.stack([s.image for s in chunk])[..., np.newaxis]
        yield chunk, batch


def evaluate(model: TrainedModel, negative_set: Dataset,
             positive_sets: list[Dataset]) -> EvalReport:
    """Run the model over one genuine-labeled set and any number of
    forged-labeled sets, aggregating counts (and the four-way matrix for
    the multi-task kind)."""
    if model.kind is ClassifierKind.CHAR_ONLY:
        raise CodecError("char-only models make no authenticity decision to evaluate")
    if len(negative_set) == 0 or any(len(p) == 0 for p in positive_sets):
        raise ValueError("test sets must be non-empty")
    if any(s.forged for s in negative_set.samples):
        raise ValueError("negative set contains forged-labeled samples")
    for i, pos in enumerate(positive_sets):
        if any(not s.forged for s in pos.samples):
            raise ValueError(f"positive set {i} contains genuine-labeled samples")

    matrix = None
    if model.kind is ClassifierKind.MULTI_TASK:
        matrix = ModifiedConfusionMatrix(np.zeros((4, model.m), dtype=np.int64))

    per_set: dict[str, BinaryCounts] = {}

    def run_set(name: str, ds: Dataset) -> None:
        tp = tn = fp = fn = 0
        for chunk, batch in _iter_chunks(ds):
            for sample, pred in zip(chunk, predict_batch(model, batch)):
                if not sample.forged:
                    if pred.forged:
                        fp += 1
                    else:
                        tn += 1
                    continue
                if model.kind is ClassifierKind.MULTI_TASK:
                    result = classify_result_type(pred, sample)
                    matrix.add_result(result, sample.char_index)
                    if result.is_true_positive:
                        tp += 1
                    else:
                        fn += 1
                else:
                    if pred.forged:
                        tp += 1
                    else:
                        fn += 1
        per_set[name] = BinaryCounts(tp=tp, tn=tn, fp=fp, fn=fn)

    run_set("negative", negative_set)
    for i, pos in enumerate(positive_sets):
        run_set(f"positive_{i}", pos)

    overall = BinaryCounts()
    for counts in per_set.values():
        overall = overall + counts

    provenance = {
        "model_hash": model.content_hash(),
        "model_kind": model.kind.value,
        "negative_set_hash": dataset_hash(negative_set),
        "positive_set_hashes": [dataset_hash(p) for p in positive_sets],
    }
    report = EvalReport(per_set=per_set, overall=overall, matrix=matrix, provenance=provenance)
    report.validate()
    return report


# --- report files -----------------------------------------------------------

def report_to_dict(report: EvalReport) -> dict:
    d = {
        "schema": SCHEMA_VERSION,
        "per_set": {k: v.to_dict() for k, v in report.per_set.items()},
        "overall": report.overall.to_dict(),
        "sensitivity_pct": format_percent(report.sensitivity()),
        "specificity_pct": format_percent(report.specificity()),
        "provenance": report.provenance,
    }
    if report.matrix is not None:
        d["matrix"] = report.matrix.to_lists()
    return d


def report_from_dict(d: dict) -> EvalReport:
    if d.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {d.get('schema')!r}")
    matrix = ModifiedConfusionMatrix(np.array(d["matrix"])) if "matrix" in d else None
    return EvalReport(
        per_set={k: BinaryCounts.from_dict(v) for k, v in d["per_set"].items()},
        overall=BinaryCounts.from_dict(d["overall"]),
        matrix=matrix,
        provenance=d.get("provenance", {}),
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    tmp.replace(path)


def load_report(path: str | Path) -> EvalReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_counts_csv(report: EvalReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set", "true_positive", "true_negative", "false_positive",
                         "false_negative", "specificity", "sensitivity"])
        rows = list(report.per_set.items()) + [("overall", report.overall)]
        for name, c in rows:
            sens = format_percent(c.sensitivity()) if c.tp + c.fn else ""
            spec = format_percent(c.specificity()) if c.tn + c.fp else ""
            writer.writerow([name, c.tp, c.tn, c.fp, c.fn, spec, sens])


def save_matrix_csv(matrix: ModifiedConfusionMatrix, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["result_type"] + [f"{c}_w" for c in range(matrix.num_classes)])
        for row_idx in range(4):
            writer.writerow([row_idx + 1] + matrix.counts[row_idx].tolist())


def load_matrix_csv(path: str | Path) -> ModifiedConfusionMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    counts = [[int(v) for v in row[1:]] for row in rows[1:5]]
    return ModifiedConfusionMatrix(np.array(counts, dtype=np.int64))
