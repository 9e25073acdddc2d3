"""Independent numeric oracles for the test suite.

The finite-difference gradient here is written against the network's
public forward/loss surface only; it never calls backward(), so it can
serve as the reference the analytic gradients are checked against.
"""

import numpy as np

from fontauth.nncore import softmax_xent


def fd_gradients(net, x, labels, step=1e-4):
    """Central differences of the mean cross-entropy loss.

    Parameters are float32 at rest, so each probe divides by the realized
    step (stored perturbed value minus stored original) instead of the
    nominal one."""
    out = []
    for p in net.params():
        grad = np.zeros(p.shape, dtype=np.float64)
        flat_p = p.reshape(-1)
        flat_g = grad.reshape(-1)
        for i in range(flat_p.size):
            original = flat_p[i].item()
            flat_p[i] = original + step
            up = flat_p[i].item() - original
            loss_up, _ = softmax_xent(net.forward(x), labels)
            flat_p[i] = original - step
            down = original - flat_p[i].item()
            loss_down, _ = softmax_xent(net.forward(x), labels)
            flat_p[i] = original
            flat_g[i] = (loss_up - loss_down) / (up + down)
        out.append(grad)
    net.clear_caches()
    return out


def max_rel_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
