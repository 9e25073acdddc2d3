"""Finite-difference verification of analytic gradients.

Central differences of the mean cross-entropy loss with respect to every
parameter. Parameters live in float32, so each probe uses the realized
step (the difference between the stored perturbed value and the stored
original) rather than the nominal one; otherwise quantization noise
dominates the quotient.
"""

from __future__ import annotations

import numpy as np

from .loss import softmax_xent
from .network import Network


def finite_difference_gradients(net: Network, x: np.ndarray, labels: np.ndarray,
                                step: float = 1e-4) -> list[np.ndarray]:
    def loss_now() -> float:
        value, _ = softmax_xent(net.forward(x), labels)
        return value

    grads = []
    for p in net.params():
        g = np.zeros(p.shape, dtype=np.float64)
        flat = p.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i].item()
            flat[i] = orig + step
            h_plus = flat[i].item() - orig
            loss_plus = loss_now()
            flat[i] = orig - step
            h_minus = orig - flat[i].item()
            loss_minus = loss_now()
            flat[i] = orig
            gf[i] = (loss_plus - loss_minus) / (h_plus + h_minus)
        grads.append(g)
    net.clear_caches()
    return grads


def max_relative_gradient_error(net: Network, x: np.ndarray, labels: np.ndarray,
                                step: float = 1e-4) -> float:
    _, grad_logits = softmax_xent(net.forward(x), labels)
    analytic = net.backward(grad_logits)
    numeric = finite_difference_gradients(net, x, labels, step)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
