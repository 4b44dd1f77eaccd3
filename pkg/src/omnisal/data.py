"""Scanpaths, saliency rasters and desk-scale synthetic scenes.

A saliency map is a plain ``(height, width)`` float64 array with row 0 at
the top of the ERP image.  A scanpath is a :class:`Scanpath` holding an
``(N, 2)`` array of normalized ``(u, v)`` fixation coordinates.
"""

from __future__ import annotations

import csv
import io
import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, DomainError, FormatError, ParseError
from .sphere import orthodromic_distance, pixel_grid

RASTER_MAGIC = b"SAL1"
CSV_HEADER = ("user", "idx", "u", "v", "t")
DEFAULT_FIXATIONS = 100
_BELOW_ONE = np.nextafter(1.0, 0.0)


class CoordinateClampWarning(UserWarning):
    """Emitted when CSV coordinates had to be clamped into ``[0, 1)``."""

    def __init__(self, count):
        self.count = count
        super().__init__(f"clamped {count} coordinate(s) into [0, 1)")


@dataclass
class Scanpath:
    """Ordered fixations of one viewer. ``t`` is optional (seconds)."""

    user_id: str
    points: np.ndarray
    t: Optional[np.ndarray] = None

    def __post_init__(self):
        self.user_id = str(self.user_id)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(self.points) == 0:
            raise DomainError("a scanpath needs at least one fixation")
        if np.any(self.points < 0.0) or np.any(self.points >= 1.0):
            raise DomainError("fixation coordinates must lie in [0, 1)")
        if self.t is not None:
            self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
            if len(self.t) != len(self.points):
                raise DomainError("timestamps and fixations differ in length")
            if np.any(self.t < 0) or np.any(np.diff(self.t) < 0):
                raise DomainError("timestamps must be non-negative and non-decreasing")

    def __len__(self):
        return len(self.points)

    @property
    def u(self):
        return self.points[:, 0]

    @property
    def v(self):
        return self.points[:, 1]

    def __eq__(self, other):
        if not isinstance(other, Scanpath):
            return NotImplemented
        if self.user_id != other.user_id or not np.array_equal(self.points, other.points):
            return False
        if self.t is None or other.t is None:
            return self.t is None and other.t is None
        return np.array_equal(self.t, other.t)


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def __post_init__(self):
        if set(self.train) & set(self.test):
            raise DomainError("train and test splits overlap")


# ---------------------------------------------------------------------------
# scanpath CSV
# ---------------------------------------------------------------------------

def _clamp_unit(x):
    if x < 0.0:
        return 0.0, True
    if x >= 1.0:
        return float(_BELOW_ONE), True
    return x, False


def parse_scanpath_csv(text):
    """Parse ``user,idx,u,v,t`` CSV text into scanpaths.

    Rows are grouped by user (in order of first appearance) and must have
    strictly increasing ``idx`` within a user.  Out-of-range ``u``/``v``
    are clamped into ``[0, 1)`` and reported once through
    :class:`CoordinateClampWarning`.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", line=1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}", line=1)

    rows = {}
    n_clamped = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 fields, got {len(row)}", line=lineno)
        user, idx_s, u_s, v_s, t_s = (c.strip() for c in row)
        try:
            idx = int(idx_s)
            u = float(u_s)
            v = float(v_s)
            t = float(t_s) if t_s else None
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not (math.isfinite(u) and math.isfinite(v)) or (t is not None and not math.isfinite(t)):
            raise ParseError("non-finite value", line=lineno)
        u, cu = _clamp_unit(u)
        v, cv = _clamp_unit(v)
        n_clamped += cu + cv
        entries = rows.setdefault(user, [])
        if entries and idx <= entries[-1][0]:
            raise FormatError(f"line {lineno}: idx {idx} not increasing for user {user!r}")
        entries.append((idx, u, v, t, lineno))

    if n_clamped:
        warnings.warn(CoordinateClampWarning(n_clamped), stacklevel=2)

    scanpaths = []
    for user, entries in rows.items():
        ts = [e[3] for e in entries]
        if all(t is None for t in ts):
            t = None
        elif any(t is None for t in ts):
            raise FormatError(f"user {user!r}: timestamps present on some rows only")
        else:
            t = np.array(ts)
        try:
            scanpaths.append(Scanpath(user, [(e[1], e[2]) for e in entries], t))
        except DomainError as exc:
            raise FormatError(f"user {user!r}: {exc}") from None
    return scanpaths


def format_scanpath_csv(scanpaths: Sequence[Scanpath]) -> str:
    """Serialize scanpaths to CSV text; inverse of :func:`parse_scanpath_csv`."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for sp in scanpaths:
        for i, (u, v) in enumerate(sp.points):
            t = "" if sp.t is None else repr(float(sp.t[i]))
            writer.writerow((sp.user_id, i, repr(float(u)), repr(float(v)), t))
    return out.getvalue()


def read_scanpaths(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_scanpath_csv(fh.read())


def write_scanpaths(path, scanpaths):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_scanpath_csv(scanpaths))


# ---------------------------------------------------------------------------
# SAL1 raster
# ---------------------------------------------------------------------------

def validate_map(values, name="map"):
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DomainError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} contains non-finite values")
    if np.any(m < 0):
        raise DomainError(f"{name} contains negative values")
    return m


def write_raster(values) -> bytes:
    """Encode a saliency map as ``SAL1`` bytes (float32, little endian, row-major)."""
    try:
        m = validate_map(values)
    except DomainError as exc:
        raise FormatError(str(exc)) from None
    data = m.astype("<f4")
    if not np.all(np.isfinite(data)):
        raise FormatError("values overflow float32")
    height, width = m.shape
    return RASTER_MAGIC + struct.pack("<II", width, height) + data.tobytes()


def read_raster(data: bytes) -> np.ndarray:
    """Decode ``SAL1`` bytes into a ``(height, width)`` float64 array."""
    if len(data) < 12:
        raise FormatError(f"truncated header: expected 12 bytes, got {len(data)}")
    if data[:4] != RASTER_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {RASTER_MAGIC!r}")
    width, height = struct.unpack("<II", data[4:12])
    if width < 1 or height < 1:
        raise FormatError(f"invalid dimensions {width}x{height}")
    expected = 12 + 4 * width * height
    if len(data) != expected:
        raise FormatError(f"payload size mismatch: expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=12).reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise FormatError("raster contains non-finite values")
    if np.any(values < 0):
        raise FormatError("raster contains negative values")
    return values.astype(np.float64)


def load_raster(path):
    with open(path, "rb") as fh:
        return read_raster(fh.read())


def save_raster(path, values):
    with open(path, "wb") as fh:
        fh.write(write_raster(values))


def load_image(path):
    """Read a 3-channel image stored as one raster with channels stacked vertically."""
    stacked = load_raster(path)
    if stacked.shape[0] % 3:
        raise FormatError(f"image raster height {stacked.shape[0]} is not a multiple of 3")
    return stacked.reshape(3, stacked.shape[0] // 3, stacked.shape[1])


def save_image(path, image):
    image = np.asarray(image)
    save_raster(path, image.reshape(-1, image.shape[-1]))


def write_pgm(values) -> bytes:
    """16-bit binary PGM, max-normalized. Lossy; meant for viewing only."""
    m = validate_map(values)
    peak = m.max()
    scaled = m / peak if peak > 0 else m
    q = np.round(scaled * 65535).astype(">u2")
    height, width = m.shape
    return f"P5\n{width} {height}\n65535\n".encode("ascii") + q.tobytes()


# ---------------------------------------------------------------------------
# splits and synthetic scenes
# ---------------------------------------------------------------------------

def make_split(ids, n_train=None, n_test=None, seed=0):
    """Shuffle ``ids`` and cut them 70/15 (i.e. 70 of every 85) unless told otherwise."""
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise DomainError("image ids must be unique")
    if n_train is None:
        n_train = round(len(ids) * 70 / 85)
    if n_test is None:
        n_test = len(ids) - n_train
    if n_train < 0 or n_test < 0 or n_train + n_test > len(ids):
        raise DomainError(f"cannot split {len(ids)} ids into {n_train}/{n_test}")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return DatasetSplit(train=shuffled[:n_train], test=shuffled[n_train:n_train + n_test])


@dataclass
class Scene:
    image: np.ndarray          # (3, H, W)
    gt_map: np.ndarray         # (H, W), peak 1
    scanpaths: list
    blob_centers: np.ndarray   # (n_blobs, 2) of (lon, lat) radians


def sample_fixations(prob_map, n, rng):
    """Draw ``n`` i.i.d. fixations from ``prob_map`` treated as a pixel mass.

    Each draw picks a pixel by inverse CDF and jitters uniformly inside it.
    Returns an ``(n, 2)`` array of ``(u, v)``.
    """
    m = validate_map(prob_map)
    total = m.sum()
    if total <= 0:
        raise DegenerateInputError("cannot sample from an all-zero map")
    height, width = m.shape
    cdf = np.cumsum(m.ravel()) / total
    flat = np.searchsorted(cdf, rng.random(n), side="right")
    flat = np.minimum(flat, m.size - 1)
    row, col = np.divmod(flat, width)
    jitter = rng.random((n, 2))
    u = (col + jitter[:, 0]) / width
    v = (row + jitter[:, 1]) / height
    pts = np.stack([u, v], axis=1)
    return np.minimum(pts, _BELOW_ONE)


def walk_fixations(prob_map, n, rng, step_deg=12.0):
    """Correlated fixations from a Metropolis random walk over ``prob_map``.

    The first fixation is an i.i.d. draw; each later one proposes a Gaussian
    step of ``step_deg`` degrees (wrapping in longitude, reflecting at the
    poles) and accepts with the usual mass ratio, so the chain's stationary
    law is the map itself while a single path only explores part of it.
    """
    m = validate_map(prob_map)
    height, width = m.shape
    su, sv = step_deg / 360.0, step_deg / 180.0
    pts = np.empty((n, 2))
    pts[0] = sample_fixations(m, 1, rng)[0]

    def mass(u, v):
        return m[min(int(v * height), height - 1), min(int(u * width), width - 1)]

    cur = mass(*pts[0])
    for i in range(1, n):
        u = (pts[i - 1, 0] + su * rng.standard_normal()) % 1.0
        v = pts[i - 1, 1] + sv * rng.standard_normal()
        v = -v if v < 0 else (2.0 - v if v >= 1.0 else v)
        v = min(max(v, 0.0), float(_BELOW_ONE))
        u = min(u, float(_BELOW_ONE))
        cand = mass(u, v)
        if cur <= 0 or rng.random() * cur < cand:
            pts[i] = (u, v)
            cur = cand
        else:
            pts[i] = pts[i - 1]
    return pts


def synthesize_scene(seed, width, height, n_blobs=3, n_scanpaths=32, n_fixations=DEFAULT_FIXATIONS,
                     noise=0.05, fixation_dt=0.2, viewer="iid"):
    """Build a deterministic toy scene: image, ground-truth map and scanpaths.

    The ground truth is a max-normalized mixture of spherical Gaussians whose
    centers favour low latitudes.  With ``viewer="iid"`` scanpaths are
    independent samples of that map; ``viewer="walk"`` uses
    :func:`walk_fixations` instead.  The image is the map on three channels
    plus clipped Gaussian noise.
    """
    if viewer not in ("iid", "walk"):
        raise DomainError(f"unknown viewer model {viewer!r}")
    if n_blobs < 1:
        raise DomainError("n_blobs must be >= 1")
    rng = np.random.default_rng(seed)
    lon_c = rng.uniform(-np.pi, np.pi, n_blobs)
    lat_c = np.clip(rng.normal(0.0, np.radians(20.0), n_blobs), -np.radians(70), np.radians(70))
    widths = np.radians(rng.uniform(8.0, 20.0, n_blobs))
    weights = rng.uniform(0.5, 1.0, n_blobs)

    lon, lat = pixel_grid(width, height)
    gt = np.zeros((height, width))
    for lo, la, s, w in zip(lon_c, lat_c, widths, weights):
        d = orthodromic_distance(lon, lat, lo, la)
        gt += w * np.exp(-d * d / (2 * s * s))
    gt /= gt.max()

    scanpaths = []
    for k in range(n_scanpaths):
        if viewer == "iid":
            pts = sample_fixations(gt, n_fixations, rng)
        else:
            pts = walk_fixations(gt, n_fixations, rng)
        scanpaths.append(Scanpath(str(k), pts, np.arange(n_fixations) * fixation_dt))

    image = np.repeat(gt[None], 3, axis=0) + noise * rng.standard_normal((3, height, width))
    image = np.clip(image, 0.0, 1.0)
    return Scene(image=image, gt_map=gt, scanpaths=scanpaths,
                 blob_centers=np.stack([lon_c, lat_c], axis=1))


__all__ = [
    "CoordinateClampWarning", "DatasetSplit", "Scanpath", "Scene",
    "parse_scanpath_csv", "format_scanpath_csv", "read_scanpaths", "write_scanpaths",
    "read_raster", "write_raster", "load_raster", "save_raster", "load_image", "save_image",
    "write_pgm", "make_split", "sample_fixations", "walk_fixations", "synthesize_scene", "validate_map",
]
