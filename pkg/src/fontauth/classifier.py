"""The classifier kinds, their label codec, training and inference.

Three kinds share one micro-CNN backbone and differ only in the output
head:

  * multi-task ("c"): joint character-and-authenticity classes, width 2M,
    class layout char_index + M * forged (genuine block, then forged block);
  * binary ("cprime"): authenticity only, width 2;
  * char-only ("std"): plain character recognizer, width M, used as the
    reference recognizer in the sequence-verdict pipeline.

The forged decision is always taken from the argmax class; the marginal
forged probability is reported alongside for downstream weighting but
never redefines the decision.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nncore
from .errors import CodecError, ShapeError, TrainingDiverged
from .nncore import LayerSpec, Network, TrainConfig
from .synthgen.dataset import Dataset, dataset_hash
from .synthgen.render import GLYPH_HEIGHT, GLYPH_WIDTH


class ClassifierKind(enum.Enum):
    MULTI_TASK = "c"      # char x authenticity, 2M classes
    BINARY = "cprime"     # authenticity only, 2 classes
    CHAR_ONLY = "std"     # character only, M classes

    @classmethod
    def from_string(cls, s: str) -> "ClassifierKind":
        for kind in cls:
            if kind.value == s:
                return kind
        raise CodecError(f"unknown classifier kind {s!r}")


def output_width(kind: ClassifierKind, m: int) -> int:
    if kind is ClassifierKind.MULTI_TASK:
        return 2 * m
    if kind is ClassifierKind.BINARY:
        return 2
    return m


@dataclass(frozen=True)
class LabelCodec:
    kind: ClassifierKind
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise CodecError("alphabet size must be >= 1")

    @property
    def num_classes(self) -> int:
        return output_width(self.kind, self.m)

    def encode(self, char_index: int, forged: bool) -> int:
        if self.kind is ClassifierKind.BINARY:
            return int(forged)
        if not (0 <= char_index < self.m):
            raise CodecError(f"char_index {char_index} out of range for M={self.m}")
        if self.kind is ClassifierKind.CHAR_ONLY:
            return char_index
        return char_index + self.m * int(forged)

    def decode_class(self, class_index: int) -> tuple[int | None, bool]:
        """(char_index, forged) for a class index; char is None for binary."""
        if not (0 <= class_index < self.num_classes):
            raise CodecError(f"class index {class_index} out of range")
        if self.kind is ClassifierKind.BINARY:
            return None, bool(class_index)
        if self.kind is ClassifierKind.CHAR_ONLY:
            return class_index, False
        return class_index % self.m, class_index >= self.m


def encode_label(char_index: int, forged: bool, kind: ClassifierKind, m: int) -> int:
    return LabelCodec(kind, m).encode(char_index, forged)


@dataclass
class Prediction:
    probabilities: np.ndarray
    forged: bool
    char_index: int | None
    confidence: float
    forged_probability: float

    def __eq__(self, other):
        if not isinstance(other, Prediction):
            return NotImplemented
        return (self.forged == other.forged and self.char_index == other.char_index
                and self.confidence == other.confidence
                and self.forged_probability == other.forged_probability
                and np.array_equal(self.probabilities, other.probabilities))


def decode_output(probabilities: np.ndarray, kind: ClassifierKind, m: int) -> Prediction:
    codec = LabelCodec(kind, m)
    probs = np.asarray(probabilities, dtype=np.float64)
    if probs.shape != (codec.num_classes,):
        raise CodecError(f"probability vector has width {probs.shape}, "
                         f"expected ({codec.num_classes},)")
    best = int(np.argmax(probs))  # argmax ties resolve to the lowest index
    char_index, forged = codec.decode_class(best)
    if kind is ClassifierKind.MULTI_TASK:
        forged_probability = float(probs[m:].sum())
    elif kind is ClassifierKind.BINARY:
        forged_probability = float(probs[1])
    else:
        forged_probability = 0.0
    return Prediction(probabilities=probs, forged=forged, char_index=char_index,
                      confidence=float(probs[best]), forged_probability=forged_probability)


def build_network(kind: ClassifierKind, m: int = 10, seed: int = 0) -> Network:
    """Reference stack: three 3x3 convs (8, 8, 12 channels, the last two
    at stride 2) and one fully connected head."""
    flat = 5 * 4 * 12  # 19x15 -> 10x8 -> 5x4 under the stride plan
    specs = [
        LayerSpec(kind="conv2d", kernel_h=3, kernel_w=3, in_channels=1, out_channels=8,
                  stride=1, padding=1),
        LayerSpec(kind="activation", activation="relu"),
        LayerSpec(kind="conv2d", kernel_h=3, kernel_w=3, in_channels=8, out_channels=8,
                  stride=2, padding=1),
        LayerSpec(kind="activation", activation="relu"),
        LayerSpec(kind="conv2d", kernel_h=3, kernel_w=3, in_channels=8, out_channels=12,
                  stride=2, padding=1),
        LayerSpec(kind="activation", activation="relu"),
        LayerSpec(kind="fully_connected", in_features=flat, out_features=output_width(kind, m)),
    ]
    net = Network((GLYPH_HEIGHT, GLYPH_WIDTH, 1), specs)
    net.init_params(seed)
    return net


@dataclass
class TrainedModel:
    kind: ClassifierKind
    m: int
    network: Network
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = output_width(self.kind, self.m)
        if self.network.output_width != expected:
            raise CodecError(f"network output width {self.network.output_width} "
                             f"does not match kind {self.kind.value} (expected {expected})")

    @property
    def codec(self) -> LabelCodec:
        return LabelCodec(self.kind, self.m)

    def content_hash(self) -> str:
        return nncore.content_hash(self.network, self._meta())

    def _meta(self) -> dict:
        return {"kind": self.kind.value, "M": self.m, "provenance": self.provenance}

    def save(self, path: str | Path) -> None:
        nncore.save_network(self.network, path, self._meta())


def load_model(path: str | Path) -> TrainedModel:
    net, meta = nncore.load_network(path)
    return TrainedModel(kind=ClassifierKind.from_string(meta["kind"]), m=meta["M"],
                        network=net, provenance=meta.get("provenance", {}))


def _as_batch(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.shape != (GLYPH_HEIGHT, GLYPH_WIDTH):
        raise ShapeError(f"expected a ({GLYPH_HEIGHT}, {GLYPH_WIDTH}) image, got {img.shape}")
    return img[np.newaxis, :, :, np.newaxis]


def predict(model: TrainedModel, image: np.ndarray) -> Prediction:
    return predict_batch(model, [image])[0]


def predict_batch(model: TrainedModel, images) -> list[Prediction]:
    if isinstance(images, np.ndarray) and images.ndim == 4:
        batch = np.asarray(images, dtype=np.float64)
    else:
        batch = np.concatenate([_as_batch(img) for img in images], axis=0)
    logits = model.network.forward(batch)
    model.network.clear_caches()
    probs = nncore.softmax(logits)
    return [decode_output(row, model.kind, model.m) for row in probs]


def _labels_for(ds: Dataset, codec: LabelCodec) -> np.ndarray:
    return np.array([codec.encode(s.char_index, s.forged) for s in ds.samples], dtype=np.int64)


def _selection_accuracy(model_kind: ClassifierKind, logits: np.ndarray, ds: Dataset, m: int) -> float:
    """Validation metric used for best-epoch selection: font-bit accuracy
    for the authenticity kinds, character accuracy for the char-only kind."""
    best = logits.argmax(axis=1)
    if model_kind is ClassifierKind.MULTI_TASK:
        pred = best >= m
        truth = np.array([s.forged for s in ds.samples])
    elif model_kind is ClassifierKind.BINARY:
        pred = best == 1
        truth = np.array([s.forged for s in ds.samples])
    else:
        pred = best
        truth = np.array([s.char_index for s in ds.samples])
    return float(np.mean(pred == truth))


def train(kind: ClassifierKind, train_ds: Dataset, val_ds: Dataset,
          cfg: TrainConfig) -> tuple[TrainedModel, list[dict]]:
    """Mini-batch SGD with momentum and per-epoch lr decay.

    Returns the parameter snapshot from the epoch with the best validation
    accuracy (earlier epoch wins ties) plus the per-epoch log. Fully
    deterministic for a fixed config seed.
    """
    if train_ds.alphabet_size != val_ds.alphabet_size:
        raise CodecError("train and validation datasets disagree on alphabet size")
    if len(val_ds) == 0:
        raise ValueError("validation dataset must be non-empty")
    if len(train_ds) == 0:
        raise ValueError("training dataset must be non-empty")

    m = train_ds.alphabet_size
    codec = LabelCodec(kind, m)
    net = build_network(kind, m, seed=cfg.seed)
    state = nncore.SgdState(net)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5D]))

    x_train = train_ds.images_array()
    y_train = _labels_for(train_ds, codec)
    x_val = val_ds.images_array()

    best_acc = -1.0
    best_params = net.copy_params()
    best_epoch = -1
    log: list[dict] = []
    lr = cfg.learning_rate

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x_train))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = net.forward(x_train[idx])
            loss, grad_logits = nncore.softmax_xent(logits, y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at epoch {epoch}, "
                                       f"batch starting {start} (lr={lr})")
            grads = net.backward(grad_logits)
            nncore.sgd_step(net, grads, lr, cfg.momentum, state)
            epoch_loss += loss * len(idx)
        epoch_loss /= len(order)

        val_logits = net.forward(x_val)
        net.clear_caches()
        val_acc = _selection_accuracy(kind, val_logits, val_ds, m)
        log.append({"epoch": epoch, "train_loss": epoch_loss, "val_accuracy": val_acc, "lr": lr})
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = net.copy_params()
            best_epoch = epoch
        lr *= cfg.lr_decay

    net.set_params(best_params)
    provenance = {
        "train_dataset_hash": dataset_hash(train_ds),
        "val_dataset_hash": dataset_hash(val_ds),
        "train_config": cfg.to_dict(),
        "best_epoch": best_epoch,
        "best_val_accuracy": best_acc,
        "final_train_loss": log[-1]["train_loss"],
    }
    model = TrainedModel(kind=kind, m=m, network=net, provenance=provenance)
    return model, log
