"""Softmax cross-entropy with the max-subtraction trick.

Loss is the batch mean in float64; grad_logits is (softmax - onehot) / B,
so each gradient row sums to zero.
"""

from __future__ import annotations

import numpy as np

from ..errors import CodecError


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise CodecError(f"logits must be (B, K), got {logits.shape}")
    b, k = logits.shape
    if labels.shape != (b,):
        raise CodecError(f"labels must be ({b},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise CodecError(f"label out of range for {k} classes")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(b), labels]))
    grad = softmax(logits)
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return loss, grad
