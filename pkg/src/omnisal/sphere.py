"""Mappings between the equirectangular (ERP) plane and the unit sphere.

ERP coordinates ``(u, v)`` are fractions of the image width and height with
``v = 0`` at the top row.  Sphere coordinates are ``(lon, lat)`` in radians,
``lon`` in ``[-pi, pi)`` and ``lat = +pi/2`` at the north pole.  All
functions accept scalars or numpy arrays and broadcast.
"""

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


def _check_range(name, x, lo, hi, hi_inclusive=False):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    upper_ok = x <= hi if hi_inclusive else x < hi
    if not np.all((x >= lo) & upper_ok):
        bracket = "]" if hi_inclusive else ")"
        raise DomainError(f"{name} outside [{lo}, {hi}{bracket}")
    return x


def erp_to_sphere(u, v):
    """Map ERP fractions ``(u, v)`` to ``(lon, lat)`` in radians."""
    u = _check_range("u", u, 0.0, 1.0)
    v = _check_range("v", v, 0.0, 1.0)
    u, v = np.broadcast_arrays(u, v)
    return (u - 0.5) * TWO_PI, (0.5 - v) * np.pi


def sphere_to_erp(lon, lat):
    """Inverse of :func:`erp_to_sphere`. ``lon = pi`` is folded onto ``-pi``."""
    lon = _check_range("lon", lon, -np.pi, np.pi, hi_inclusive=True)
    lat = _check_range("lat", lat, -HALF_PI, HALF_PI, hi_inclusive=True)
    lon = np.where(lon == np.pi, -np.pi, lon)
    u = lon / TWO_PI + 0.5
    v = 0.5 - lat / np.pi
    # rounding just below lon = pi, or the south pole itself, can reach 1; keep inside [0, 1)
    below_one = np.nextafter(1.0, 0.0)
    return np.minimum(u, below_one), np.minimum(v, below_one)


def orthodromic_distance(lon1, lat1, lon2, lat2):
    """Great-circle central angle between two points, in ``[0, pi]``.

    Uses the haversine form, which stays accurate for nearby points where
    the spherical law of cosines loses precision.
    """
    lon1, lat1, lon2, lat2 = (np.asarray(a, dtype=np.float64) for a in (lon1, lat1, lon2, lat2))
    s_lat = np.sin(0.5 * (lat2 - lat1))
    s_lon = np.sin(0.5 * (lon2 - lon1))
    h = s_lat * s_lat + np.cos(lat1) * np.cos(lat2) * s_lon * s_lon
    h = np.clip(h, 0.0, 1.0)
    return 2.0 * np.arcsin(np.sqrt(h))


def pixel_centers(width, height):
    """ERP fractions of pixel centers: ``u = (col + .5)/W``, ``v = (row + .5)/H``."""
    if width < 1 or height < 1:
        raise DomainError("raster dimensions must be >= 1")
    u = (np.arange(width) + 0.5) / width
    v = (np.arange(height) + 0.5) / height
    return u, v


def pixel_grid(width, height):
    """Return ``(lon, lat)`` arrays of shape ``(height, width)`` at pixel centers."""
    u, v = pixel_centers(width, height)
    return erp_to_sphere(*np.meshgrid(u, v))


def row_latitudes(height):
    """Latitude (radians) of each row center, top row first."""
    v = (np.arange(height) + 0.5) / height
    return (0.5 - v) * np.pi


def solid_angle_weights(width, height):
    """Per-pixel ``cos(lat)`` weights compensating for ERP oversampling of the poles."""
    if width < 1 or height < 1:
        raise DomainError("raster dimensions must be >= 1")
    w = np.cos(row_latitudes(height))
    return np.repeat(w[:, None], width, axis=1)


def nearest_pixel(u, v, width, height):
    """Index ``(row, col)`` of the pixel containing ERP point ``(u, v)``."""
    col = np.clip(np.floor(np.asarray(u) * width).astype(np.int64), 0, width - 1)
    row = np.clip(np.floor(np.asarray(v) * height).astype(np.int64), 0, height - 1)
    return row, col
