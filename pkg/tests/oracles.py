"""Brute-force reference implementations shared by the metric and acceptance tests."""

import math
from fractions import Fraction

import numpy as np


def judd_oracle(pred, fix):
    """Thresholds at each fixated value, counted pixel by pixel, area in exact rationals."""
    flat_p = [float(x) for x in np.ravel(pred)]
    flat_f = [bool(x) for x in np.ravel(fix)]
    n_pos = sum(flat_f)
    n_neg = len(flat_f) - n_pos
    points = [(Fraction(0), Fraction(0))]
    for t in sorted({p for p, f in zip(flat_p, flat_f) if f}, reverse=True):
        tp = sum(1 for p, f in zip(flat_p, flat_f) if f and p >= t)
        fp = sum(1 for p, f in zip(flat_p, flat_f) if not f and p >= t)
        points.append((Fraction(fp, n_neg), Fraction(tp, n_pos)))
    points.append((Fraction(1), Fraction(1)))
    area = sum((x1 - x0) * (y1 + y0) / 2 for (x0, y0), (x1, y1) in zip(points, points[1:]))
    return float(area)


def path_oracle(cost):
    """Enumerate every monotone path; cheapest total wins, fewer cells on ties."""
    n, m = cost.shape
    best = (math.inf, 0)

    def walk(i, j, total, cells):
        nonlocal best
        total = total + cost[i, j]
        cells += 1
        if (i, j) == (n - 1, m - 1):
            if total < best[0] or (total == best[0] and cells < best[1]):
                best = (total, cells)
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, total, cells)

    walk(0, 0, 0.0, 0)
    return best


def zscore_oracle(m):
    m = np.ravel(m)
    mu = sum(m) / m.size
    sd = math.sqrt(sum((x - mu) ** 2 for x in m) / m.size)
    return [(x - mu) / sd for x in m]
