"""Central finite-difference checks of the hand-written backward passes."""

import numpy as np

DEFAULT_STEP = 1e-5
# denominators below this are treated as absolute rather than relative error
_FLOOR = 1e-8


def relative_error(analytic, numeric):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), _FLOOR)
    return np.abs(analytic - numeric) / denom


def grad_check(loss_fn, tensors, n_coords=50, h=DEFAULT_STEP, seed=0):
    """Largest relative error between backprop and central differences.

    ``loss_fn()`` must rebuild the scalar loss from the current values of
    ``tensors``.  ``n_coords`` coordinates are drawn at random across all
    tensors (every coordinate when fewer exist).
    """
    for t in tensors:
        t.grad = None
        t.requires_grad = True
    loss_fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]

    sizes = np.array([t.data.size for t in tensors])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_coords, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        idx = np.unravel_index(int(flat - offsets[k]), tensors[k].shape)
        data = tensors[k].data
        orig = data[idx]
        data[idx] = orig + h
        up = loss_fn().item()
        data[idx] = orig - h
        down = loss_fn().item()
        data[idx] = orig
        numeric = (up - down) / (2 * h)
        worst = max(worst, float(relative_error(analytic[k][idx], numeric)))
    return worst
