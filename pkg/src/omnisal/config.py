"""Flat ``key = value`` run configuration with flag > file > default precedence."""

from .errors import DomainError, FormatError

DEFAULTS = {
    "alpha": 0.7,
    "k": 1.0,
    "sigma_deg": 11.75,
    "sigma_lat_deg": 25.0,
    "beta": 25.0,
    "seed": 0,
    "width": 256,
    "height": 128,
    "lr": 1e-4,
    "steps": 200,
    "n_scenes": 2,
    "n_blobs": 3,
    "n_scanpaths": 32,
}

_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise FormatError(f"config line {lineno}: expected 'key = value'")
        if key not in DEFAULTS:
            raise FormatError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip(), lineno)
    return out


def _coerce(key, value, lineno=None):
    try:
        return _TYPES[key](value)
    except ValueError:
        where = f"config line {lineno}: " if lineno else ""
        raise FormatError(f"{where}{key} expects {_TYPES[key].__name__}, got {value!r}") from None


def resolve(flags, file_values=None):
    """Merge layers: explicit flags beat file values beat built-in defaults."""
    cfg = dict(DEFAULTS)
    cfg.update(file_values or {})
    cfg.update({k: v for k, v in flags.items() if v is not None and k in DEFAULTS})
    validate(cfg)
    return cfg


def validate(cfg):
    if not 0.0 <= cfg["alpha"] <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {cfg['alpha']}")
    if cfg["k"] < 1.0:
        raise DomainError(f"k must be >= 1, got {cfg['k']}")
    for key in ("sigma_deg", "sigma_lat_deg", "beta", "lr"):
        if not cfg[key] > 0:
            raise DomainError(f"{key} must be > 0, got {cfg[key]}")
    for key in ("width", "height", "steps", "n_scenes", "n_blobs", "n_scanpaths"):
        if cfg[key] < 1:
            raise DomainError(f"{key} must be >= 1, got {cfg[key]}")
