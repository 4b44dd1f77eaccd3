"""``SPW1`` parameter checkpoints.

Layout (little endian): magic ``SPW1``; u32 length + UTF-8 JSON model config;
u32 parameter count; then per parameter: u16 name length + UTF-8 name,
u8 rank, u32 per dimension, u32 element count, float32 payload.
"""

import json
import struct
from collections import OrderedDict

import numpy as np

from ..errors import FormatError
from .autograd import Tensor
from .model import GROUPS, ModelConfig, NetworkParams

MAGIC = b"SPW1"


def dumps(params: NetworkParams, cfg: ModelConfig) -> bytes:
    header = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    named = list(params.named())
    parts = [MAGIC, struct.pack("<I", len(header)), header, struct.pack("<I", len(named))]
    for name, t in named:
        raw = name.encode("utf-8")
        data = t.data.astype("<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", data.ndim) + struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(struct.pack("<I", data.size) + data.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated checkpoint: need {n} bytes at offset {self.pos}, "
                              f"only {len(self.data) - self.pos} left")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes):
    """Return ``(params, cfg)`` from checkpoint bytes."""
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatError("bad checkpoint magic")
    (hlen,) = r.unpack("<I")
    try:
        raw_cfg = json.loads(r.take(hlen).decode("utf-8"))
        cfg = ModelConfig.from_dict(raw_cfg)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad checkpoint config: {exc}") from None
    (count,) = r.unpack("<I")
    groups = {g: OrderedDict() for g in GROUPS}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I") if rank else ()
        (size,) = r.unpack("<I")
        if size != int(np.prod(shape)):
            raise FormatError(f"{name}: element count {size} does not match shape {shape}")
        values = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape).astype(np.float64)
        group, _, key = name.partition(".")
        if group not in groups:
            raise FormatError(f"unknown parameter group in {name!r}")
        groups[group][key] = Tensor(values, requires_grad=True, name=key)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes in checkpoint")
    return NetworkParams(groups), cfg


def save(path, params, cfg):
    with open(path, "wb") as fh:
        fh.write(dumps(params, cfg))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
