"""Scanpath-to-heatmap synthesis and the equator-bias prior.

Kernels are Gaussians in great-circle angle, so a fixation near a pole
spreads over the whole top of the ERP image instead of a thin planar disc.
"""

from dataclasses import dataclass

import numpy as np

from .data import Scanpath, validate_map
from .errors import DegenerateInputError, DomainError
from .sphere import nearest_pixel, orthodromic_distance, pixel_grid, row_latitudes

# fixations x pixels evaluated per chunk; bounds the temporary distance matrix
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class KernelConfig:
    sigma_deg: float = 11.75

    def __post_init__(self):
        if not self.sigma_deg > 0:
            raise DomainError(f"sigma_deg must be > 0, got {self.sigma_deg}")


@dataclass(frozen=True)
class EquatorBiasConfig:
    sigma_lat_deg: float = 25.0

    def __post_init__(self):
        if not self.sigma_lat_deg > 0:
            raise DomainError(f"sigma_lat_deg must be > 0, got {self.sigma_lat_deg}")


def _points(scanpaths):
    if isinstance(scanpaths, Scanpath):
        scanpaths = [scanpaths]
    if len(scanpaths) == 0:
        raise DomainError("need at least one scanpath")
    return np.concatenate([sp.points for sp in scanpaths], axis=0)


def kernel_density(points, width, height, cfg=KernelConfig()):
    """Unnormalized sum of spherical Gaussians centred on ``points`` ((N, 2) of u, v)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    sigma = np.radians(cfg.sigma_deg)
    lon, lat = pixel_grid(width, height)
    lon, lat = lon.ravel(), lat.ravel()
    f_lon = (points[:, 0] - 0.5) * 2 * np.pi
    f_lat = (0.5 - points[:, 1]) * np.pi
    acc = np.zeros(lon.size)
    step = max(1, _CHUNK_ELEMENTS // lon.size)
    for s in range(0, len(points), step):
        d = orthodromic_distance(lon[None, :], lat[None, :],
                                 f_lon[s:s + step, None], f_lat[s:s + step, None])
        acc += np.exp(-(d * d) / (2 * sigma * sigma)).sum(axis=0)
    return acc.reshape(height, width)


def _max_normalize(m):
    peak = m.max()
    if not peak > 0:
        raise DegenerateInputError("map is identically zero")
    return m / peak


def scanpath_to_map(sp, width, height, cfg=KernelConfig()):
    """Heatmap of a single scanpath, peak normalized to 1."""
    return _max_normalize(kernel_density(_points(sp), width, height, cfg))


def aggregate_scanpaths(scanpaths, width, height, cfg=KernelConfig()):
    """Heatmap pooling every fixation of every scanpath, peak normalized to 1."""
    return _max_normalize(kernel_density(_points(scanpaths), width, height, cfg))


def fixation_map(scanpaths, width, height):
    """Binary map with ones at every pixel holding at least one fixation."""
    pts = _points(scanpaths)
    row, col = nearest_pixel(pts[:, 0], pts[:, 1], width, height)
    out = np.zeros((height, width))
    out[row, col] = 1.0
    return out


def equator_bias(width, height, cfg=EquatorBiasConfig()):
    """Latitude-only Gaussian prior, 1 on the equator and symmetric north/south."""
    if width < 1 or height < 1:
        raise DomainError("raster dimensions must be >= 1")
    s = np.radians(cfg.sigma_lat_deg)
    lat = row_latitudes(height)
    rows = np.exp(-(lat * lat) / (2 * s * s))
    return validate_map(np.repeat(rows[:, None], width, axis=1))
