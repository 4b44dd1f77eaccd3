"""Weighted power-mean fusion of two saliency maps and equator-bias damping."""

from dataclasses import dataclass

import numpy as np

from .data import validate_map
from .errors import DegenerateInputError, DomainError, ShapeError
from .heatmap import EquatorBiasConfig, KernelConfig, equator_bias, scanpath_to_map


@dataclass(frozen=True)
class FusionConfig:
    alpha: float = 0.7
    k: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.k >= 1.0:
            raise DomainError(f"k must be >= 1, got {self.k}")


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def linear_scale(bias):
    """Min-max scale to ``[0, 1]``; a constant map becomes all ones."""
    bias = validate_map(bias, "bias")
    lo, hi = bias.min(), bias.max()
    if hi == lo:
        return np.ones_like(bias)
    return (bias - lo) / (hi - lo)


def joint_merge(primary, scanpath_map, cfg=FusionConfig()):
    """Per-pixel weighted power mean of two maps under a shared global scale.

    Both maps are divided by the largest value found in either, combined as
    ``(alpha * t**k + (1 - alpha) * s**k) ** (1/k)`` and scaled back.  For
    ``k = 1`` this is plain linear blending.
    """
    t = validate_map(primary, "T")
    s = validate_map(scanpath_map, "S")
    _same_shape(t, s, "joint_merge")
    top = max(t.max(), s.max())
    if top == 0:
        raise DegenerateInputError("both maps are identically zero")
    if cfg.alpha == 1.0:
        return t.copy()
    if cfg.alpha == 0.0:
        return s.copy()
    tn, sn = t / top, s / top
    if cfg.k == 1.0:
        return top * (cfg.alpha * tn + (1.0 - cfg.alpha) * sn)
    mixed = cfg.alpha * tn ** cfg.k + (1.0 - cfg.alpha) * sn ** cfg.k
    return top * mixed ** (1.0 / cfg.k)


def unbias(joint, bias):
    """Average ``joint`` with its bias-weighted copy: ``J/2 + J * Ls(E) / 2``."""
    j = validate_map(joint, "J")
    e = validate_map(bias, "E")
    _same_shape(j, e, "unbias")
    return 0.5 * j + 0.5 * j * linear_scale(e)


def salypath_pipeline(primary, scanpath, fusion=FusionConfig(), kernel=KernelConfig(),
                      bias=EquatorBiasConfig()):
    """Fuse a primary saliency map with the heatmap of a predicted scanpath.

    Returns the unbiased joint map; ``scanpath`` may be a single
    :class:`~omnisal.data.Scanpath` or a list of them.
    """
    t = validate_map(primary, "T")
    height, width = t.shape
    s = scanpath_to_map(scanpath, width, height, kernel)
    e = equator_bias(width, height, bias)
    return unbias(joint_merge(t, s, fusion), e)
