"""Scanpath metrics: spatial Jarodzka alignment score and hybrid NSS."""

import numpy as np

from ..data import Scanpath
from ..errors import DegenerateInputError, DomainError
from ..sphere import nearest_pixel, orthodromic_distance


def _sphere(points):
    pts = np.asarray(points.points if isinstance(points, Scanpath) else points, dtype=np.float64)
    pts = pts.reshape(-1, 2)
    if len(pts) == 0:
        raise DomainError("empty scanpath")
    return (pts[:, 0] - 0.5) * 2 * np.pi, (0.5 - pts[:, 1]) * np.pi


def distance_matrix(pred, gt):
    """Great-circle distances between every fixation of ``pred`` and of ``gt``."""
    plon, plat = _sphere(pred)
    glon, glat = _sphere(gt)
    return orthodromic_distance(plon[:, None], plat[:, None], glon[None, :], glat[None, :])


def align(cost):
    """Cheapest monotone path from the top-left to the bottom-right cell.

    Moves go right, down or diagonally.  Returns ``(total_cost, n_cells)``;
    on equal totals the path with fewer cells wins.
    """
    n, m = cost.shape
    total = np.full((n, m), np.inf)
    length = np.zeros((n, m), dtype=np.int64)
    total[0, 0] = cost[0, 0]
    length[0, 0] = 1
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best, best_len = np.inf, 0
            for pi, pj in ((i - 1, j - 1), (i - 1, j), (i, j - 1)):
                if pi < 0 or pj < 0:
                    continue
                c, ln = total[pi, pj], length[pi, pj]
                if c < best or (c == best and ln < best_len):
                    best, best_len = c, ln
            total[i, j] = best + cost[i, j]
            length[i, j] = best_len + 1
    return float(total[-1, -1]), int(length[-1, -1])


def jarodzka(pred, gt):
    """Mean great-circle distance along the optimal alignment, divided by pi.

    0 for identical scanpaths, 1 when every aligned pair is antipodal.
    Timing is ignored.
    """
    total, n_cells = align(distance_matrix(pred, gt))
    return total / n_cells / np.pi


def hybrid_nss(pred, gt_map):
    """Mean z-scored ground-truth saliency at the pixel of each predicted fixation."""
    gt_map = np.asarray(gt_map, dtype=np.float64)
    sd = gt_map.std()
    if sd == 0:
        raise DegenerateInputError("gt_map is constant")
    z = (gt_map - gt_map.mean()) / sd
    pts = pred.points if isinstance(pred, Scanpath) else np.asarray(pred).reshape(-1, 2)
    if len(pts) == 0:
        raise DomainError("empty scanpath")
    height, width = gt_map.shape
    row, col = nearest_pixel(pts[:, 0], pts[:, 1], width, height)
    return float(z[row, col].mean())


SCANPATH_METRICS = ("jarodzka", "hybrid_nss")
