"""Saliency-map metrics: AUC-Judd, AUC-Borji, NSS, CC, SIM and KLD.

``pred`` and ``gt`` are non-negative ``(H, W)`` arrays; ``fix`` is a binary
fixation map of the same shape.
"""

import numpy as np

from ..errors import DegenerateInputError, DomainError, ShapeError

EPS = 1e-7


def _pair(a, b, names=("pred", "gt")):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")
    for name, x in zip(names, (a, b)):
        if not np.all(np.isfinite(x)):
            raise DomainError(f"{name} contains non-finite values")
    return a, b


def _as_mass(m, name):
    total = m.sum()
    if not total > 0:
        raise DegenerateInputError(f"{name} has no mass to normalize")
    return m / total


def _zscore(m, name):
    sd = m.std()
    if sd == 0:
        raise DegenerateInputError(f"{name} is constant; z-score undefined")
    return (m - m.mean()) / sd


def _fixations(pred, fix):
    pred, fix = _pair(pred, fix, ("pred", "fix"))
    mask = fix > 0
    if not mask.any():
        raise DomainError("fixation map contains no fixations")
    return pred, mask


def kld(pred, gt):
    """KL(gt || pred) between the two maps seen as probability masses."""
    pred, gt = _pair(pred, gt)
    p = _as_mass(gt, "gt")
    q = _as_mass(pred, "pred")
    # with the epsilon terms, identical maps land a hair below zero; clamp
    return max(0.0, float(np.sum(p * np.log(p / (q + EPS) + EPS))))


def cc(pred, gt):
    """Pearson linear correlation between the maps."""
    pred, gt = _pair(pred, gt)
    a = _zscore(pred, "pred")
    b = _zscore(gt, "gt")
    return float(np.mean(a * b))


def sim(pred, gt):
    """Histogram intersection of the sum-normalized maps."""
    pred, gt = _pair(pred, gt)
    return float(np.minimum(_as_mass(pred, "pred"), _as_mass(gt, "gt")).sum())


def nss(pred, fix):
    """Mean z-scored prediction over fixated pixels."""
    pred, mask = _fixations(pred, fix)
    return float(_zscore(pred, "pred")[mask].mean())


def _trapezoid(fp, tp):
    fp = np.concatenate([[0.0], fp, [1.0]])
    tp = np.concatenate([[0.0], tp, [1.0]])
    return float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1]) * 0.5))


def auc_judd(pred, fix):
    """ROC area with thresholds placed at each fixated pixel's saliency.

    At threshold ``t`` the true-positive rate is the share of fixated pixels
    with value ``>= t`` and the false-positive rate the share of the remaining
    pixels with value ``>= t``.
    """
    pred, mask = _fixations(pred, fix)
    if pred.max() == pred.min():
        raise DegenerateInputError("pred is constant")
    pos = np.sort(pred[mask])
    neg = np.sort(pred[~mask])
    if neg.size == 0:
        raise DegenerateInputError("every pixel is fixated")
    thresholds = np.unique(pos)[::-1]
    tp = pos.size - np.searchsorted(pos, thresholds, side="left")
    fp = neg.size - np.searchsorted(neg, thresholds, side="left")
    # trapezoids on integer counts, one final division: the area is the
    # correctly rounded value of the exact rational
    tp = np.concatenate([[0], tp, [pos.size]]).astype(object)
    fp = np.concatenate([[0], fp, [neg.size]]).astype(object)
    twice_area = sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1]))
    return twice_area / (2 * pos.size * neg.size)


def auc_borji(pred, fix, n_splits=100, step=0.1, seed=0):
    """ROC area against uniformly drawn non-fixated pixels, averaged over splits.

    The map is min-max scaled to ``[0, 1]`` and swept at fixed ``step``.  Each
    split draws as many negatives as there are fixated pixels.
    """
    pred, mask = _fixations(pred, fix)
    lo, hi = pred.min(), pred.max()
    if hi == lo:
        raise DegenerateInputError("pred is constant")
    scaled = (pred - lo) / (hi - lo)
    pos = scaled[mask]
    pool = scaled[~mask]
    if pool.size == 0:
        raise DegenerateInputError("every pixel is fixated")
    rng = np.random.default_rng(seed)
    neg = pool[rng.integers(0, pool.size, size=(n_splits, pos.size))]
    scores = np.empty(n_splits)
    for k in range(n_splits):
        top = max(pos.max(), neg[k].max())
        thresholds = np.arange(0.0, top, step)[::-1]
        tp = (pos[None, :] >= thresholds[:, None]).mean(axis=1)
        fp = (neg[k][None, :] >= thresholds[:, None]).mean(axis=1)
        scores[k] = _trapezoid(fp, tp)
    return float(scores.mean())


SALIENCY_METRICS = ("auc_judd", "auc_borji", "nss", "cc", "sim", "kld")


def saliency_report(pred, gt, fix=None, seed=0):
    """All saliency metrics for one image; location metrics need ``fix``."""
    report = {}
    if fix is not None:
        report["auc_judd"] = auc_judd(pred, fix)
        report["auc_borji"] = auc_borji(pred, fix, seed=seed)
        report["nss"] = nss(pred, fix)
    report["cc"] = cc(pred, gt)
    report["sim"] = sim(pred, gt)
    report["kld"] = kld(pred, gt)
    return report
