"""Toy encoder/attention/decoder network with an auxiliary fixation head.

The encoder halves the resolution four times.  At the bottleneck a spatial
attention map gates the features through a learnable scalar ``gamma``; the
refined features feed both the decoder (single-channel sigmoid saliency)
and the auxiliary head whose channels are reduced to fixation coordinates
by soft-argmax.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data import Scanpath
from ..errors import DomainError, ShapeError
from .autograd import Tensor, as_tensor
from .layers import conv2d, gated_residual, maxpool2, relu, sigmoid, soft_argmax, upsample2

GROUPS = ("encoder", "attention", "decoder", "aux")


@dataclass(frozen=True)
class ModelConfig:
    width: int = 256
    height: int = 128
    in_channels: int = 3
    encoder_widths: tuple = (8, 16, 16, 32)
    decoder_widths: tuple = (32, 16, 16, 8)
    attention_width: int = 16
    attention_dilation: int = 4
    aux_widths: tuple = (32, 32, 32)
    n_fixations: int = 100
    beta: float = 25.0

    def __post_init__(self):
        if self.width % 16 or self.height % 16 or self.width < 16 or self.height < 16:
            raise DomainError(f"input {self.width}x{self.height} must be divisible by 16")
        if len(self.encoder_widths) != 4 or len(self.decoder_widths) != 4:
            raise DomainError("encoder and decoder have exactly four blocks")
        if self.n_fixations < 1:
            raise DomainError("n_fixations must be >= 1")
        if not self.beta > 0:
            raise DomainError("beta must be > 0")
        for name in ("encoder_widths", "decoder_widths", "aux_widths"):
            object.__setattr__(self, name, tuple(int(c) for c in getattr(self, name)))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class NetworkParams:
    """Learnable tensors by group, plus a frozen flag per group."""

    groups: dict
    frozen: dict = field(default_factory=lambda: {g: False for g in GROUPS})

    def __getitem__(self, key):
        group, _, name = key.partition(".")
        return self.groups[group][name]

    def named(self, groups=GROUPS):
        for g in groups:
            for name, t in self.groups[g].items():
                yield f"{g}.{name}", t

    def trainable(self):
        return [t for g in GROUPS if not self.frozen[g] for t in self.groups[g].values()]

    def freeze(self, *groups):
        for g in groups:
            self.frozen[g] = True
        self._sync()

    def unfreeze(self, *groups):
        for g in groups:
            self.frozen[g] = False
        self._sync()

    def _sync(self):
        for g in GROUPS:
            for t in self.groups[g].values():
                t.requires_grad = not self.frozen[g]
                if self.frozen[g]:
                    t.grad = None

    def zero_grad(self):
        for _, t in self.named():
            t.grad = None

    def copy(self):
        groups = {g: OrderedDict((k, Tensor(t.data.copy(), requires_grad=t.requires_grad, name=t.name))
                                 for k, t in items.items())
                  for g, items in self.groups.items()}
        return NetworkParams(groups, dict(self.frozen))

    def state(self):
        """Flat ``name -> array`` copy of every parameter."""
        return {name: t.data.copy() for name, t in self.named()}


def _conv_params(rng, group, prefix, c_in, c_out, k=3, bias_std=0.0):
    fan_in = c_in * k * k
    w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, k, k))
    b = rng.normal(0.0, bias_std, size=c_out) if bias_std > 0 else np.zeros(c_out)
    group[f"{prefix}.weight"] = Tensor(w, requires_grad=True, name=f"{prefix}.weight")
    group[f"{prefix}.bias"] = Tensor(b, requires_grad=True, name=f"{prefix}.bias")


def init_params(cfg: ModelConfig, seed=0, gamma=0.0, bias_std=0.0) -> NetworkParams:
    """He-initialized weights. ``bias_std > 0`` draws random biases, which keeps
    pre-activations off the ReLU kink (used by gradient checks)."""
    rng = np.random.default_rng(seed)
    groups = {g: OrderedDict() for g in GROUPS}

    def conv(group, prefix, c_in, c_out, k=3):
        _conv_params(rng, groups[group], prefix, c_in, c_out, k, bias_std)

    c = cfg.in_channels
    for b, width in enumerate(cfg.encoder_widths):
        conv("encoder", f"block{b}.conv0", c, width)
        conv("encoder", f"block{b}.conv1", width, width)
        c = width
    bottleneck = c

    att = groups["attention"]
    conv("attention", "conv0", bottleneck, cfg.attention_width)
    conv("attention", "conv1", cfg.attention_width, cfg.attention_width)
    conv("attention", "out", cfg.attention_width, 1, k=1)
    att["gamma"] = Tensor(np.array(float(gamma)), requires_grad=True, name="gamma")

    c = bottleneck
    for b, width in enumerate(cfg.decoder_widths):
        conv("decoder", f"block{b}.conv0", c, width)
        conv("decoder", f"block{b}.conv1", width, width)
        c = width
    conv("decoder", "out", c, 1, k=1)

    c = bottleneck
    for i, width in enumerate(cfg.aux_widths):
        conv("aux", f"conv{i}", c, width)
        c = width
    conv("aux", "out", c, cfg.n_fixations)
    return NetworkParams(groups)


def _conv(x, group, prefix, padding=1, dilation=1):
    return conv2d(x, group[f"{prefix}.weight"], group[f"{prefix}.bias"], padding=padding, dilation=dilation)


def encode(params, images):
    x = as_tensor(images)
    enc = params.groups["encoder"]
    for b in range(4):
        x = relu(_conv(x, enc, f"block{b}.conv0"))
        x = relu(_conv(x, enc, f"block{b}.conv1"))
        x = maxpool2(x)
    return x


def attention_map(params, x, cfg: ModelConfig):
    """Single-channel sigmoid heatmap over the bottleneck features."""
    att = params.groups["attention"]
    d = cfg.attention_dilation
    a = relu(_conv(x, att, "conv0", padding=d, dilation=d))
    a = relu(_conv(a, att, "conv1", padding=d, dilation=d))
    return sigmoid(_conv(a, att, "out", padding=0))


def attention_refine(params, x, cfg: ModelConfig):
    """Refined features ``gamma * x * att(x) + x``."""
    return gated_residual(x, attention_map(params, x, cfg), params.groups["attention"]["gamma"])


def decode(params, x):
    dec = params.groups["decoder"]
    for b in range(4):
        x = relu(_conv(x, dec, f"block{b}.conv0"))
        x = relu(_conv(x, dec, f"block{b}.conv1"))
        x = upsample2(x)
    return sigmoid(_conv(x, dec, "out", padding=0))


def aux_heatmaps(params, x, cfg: ModelConfig):
    aux = params.groups["aux"]
    for i in range(len(cfg.aux_widths)):
        x = relu(_conv(x, aux, f"conv{i}"))
    return relu(_conv(x, aux, "out"))


def _check_images(images, cfg):
    data = images.data if isinstance(images, Tensor) else np.asarray(images)
    if data.ndim == 3:
        data = data[None]
    expected = (cfg.in_channels, cfg.height, cfg.width)
    if data.ndim != 4 or data.shape[1:] != expected:
        raise ShapeError(f"expected images of shape (N, {expected[0]}, {expected[1]}, {expected[2]}), got {data.shape}")
    return images if isinstance(images, Tensor) and images.ndim == 4 else Tensor(data)


def forward(params, images, cfg: ModelConfig, saliency=True, scanpath=True):
    """Run the network on ``(N, 3, H, W)`` images.

    Returns ``(saliency, coords)``: a ``(N, 1, H, W)`` tensor and a
    ``(N, n_fixations, 2)`` tensor of ``(u, v)``.  Either branch can be
    skipped, in which case ``None`` is returned in its place.
    """
    x = _check_images(images, cfg)
    refined = attention_refine(params, encode(params, x), cfg)
    sal = decode(params, refined) if saliency else None
    coords = soft_argmax(aux_heatmaps(params, refined, cfg), cfg.beta) if scanpath else None
    return sal, coords


def predict(params, image, cfg: ModelConfig):
    """Saliency map ``(H, W)`` and predicted :class:`Scanpath` for one image."""
    sal, coords = forward(params, np.asarray(image)[None], cfg)
    pts = np.clip(coords.data[0], 0.0, np.nextafter(1.0, 0.0))
    return sal.data[0, 0].copy(), Scanpath("pred", pts)
