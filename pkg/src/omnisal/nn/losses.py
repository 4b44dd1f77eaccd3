"""Training losses for the saliency and scanpath branches."""

import numpy as np

from ..errors import DomainError, ShapeError
from .autograd import Tensor, as_tensor, log, sqrt

EPS = 1e-7


def _per_sample(t):
    """Reshape ``(N, ...)`` or ``(H, W)`` to ``(N, P)``."""
    t = as_tensor(t)
    if t.ndim == 2:
        return t.reshape(1, -1)
    return t.reshape(t.shape[0], -1)


def kl_div(pred, gt):
    """KL(gt || pred) between sum-normalized maps, averaged over the batch."""
    p = _per_sample(gt)
    q = _per_sample(pred)
    p = p / p.sum(axis=1, keepdims=True)
    q = q / q.sum(axis=1, keepdims=True)
    return (p * log(p / (q + EPS) + EPS)).sum(axis=1).mean()


def bce(pred, gt):
    """Pixel-mean binary cross entropy with ``gt`` as soft targets."""
    y = _per_sample(gt)
    yh = _per_sample(pred)
    return -(y * log(yh + EPS) + (1.0 - y) * log(1.0 - yh + EPS)).mean()


def nss(pred, fix):
    """Differentiable NSS; the standard deviation is guarded by ``EPS``."""
    s = _per_sample(pred)
    f = _per_sample(fix).data
    if np.any(f.sum(axis=1) == 0):
        raise DomainError("each fixation map needs at least one fixation")
    mu = s.mean(axis=1, keepdims=True)
    centred = s - mu
    sd = sqrt((centred * centred).mean(axis=1, keepdims=True))
    z = centred / (sd + EPS)
    return ((z * Tensor(f)).sum(axis=1) / Tensor(f.sum(axis=1))).mean()


def loss_l1(pred, gt, fix):
    """Saliency loss ``0.8 KL + 0.2 BCE - 0.2 NSS``."""
    if _per_sample(pred).shape != _per_sample(gt).shape or _per_sample(gt).shape != _per_sample(fix).shape:
        raise ShapeError("prediction, ground truth and fixation maps must share a shape")
    return 0.8 * kl_div(pred, gt) + 0.2 * bce(pred, gt) - 0.2 * nss(pred, fix)


def loss_l2(pred_coords, target):
    """Mean over fixations of the squared Euclidean error, averaged over the batch.

    ``pred_coords`` is ``(N, F, 2)`` (or ``(F, 2)``) and ``target`` matches it.
    """
    pred = as_tensor(pred_coords)
    tgt = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if pred.shape != tgt.shape:
        raise ShapeError(f"scanpath shapes differ: {pred.shape} vs {tgt.shape}")
    diff = pred - Tensor(tgt)
    sq = (diff * diff).sum(axis=-1)
    return sq.mean()
