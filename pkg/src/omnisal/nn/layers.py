"""Differentiable layers on NCHW tensors: convolution, activations, pooling, soft-argmax."""

import numpy as np

from ..errors import DomainError, ShapeError
from .autograd import Tensor, make


def conv2d(x, weight, bias=None, padding=1, dilation=1):
    """Stride-1 2-D convolution (cross-correlation) with zero padding.

    ``x`` is ``(N, C, H, W)``, ``weight`` is ``(O, C, kh, kw)``.  Computed as a
    sum over kernel taps so both passes reduce to ``tensordot`` calls.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d expects a 4-D input and a 4-D weight")
    n, c, h, w = x.shape
    o, c_w, kh, kw = weight.shape
    if c != c_w:
        raise ShapeError(f"conv2d: input has {c} channels, weight expects {c_w}")
    out_h = h + 2 * padding - dilation * (kh - 1)
    out_w = w + 2 * padding - dilation * (kw - 1)
    if out_h < 1 or out_w < 1:
        raise ShapeError("conv2d: kernel larger than padded input")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    wd = weight.data
    taps = [(i, j, slice(i * dilation, i * dilation + out_h), slice(j * dilation, j * dilation + out_w))
            for i in range(kh) for j in range(kw)]

    out = np.zeros((n, o, out_h, out_w))
    for i, j, rs, cs in taps:
        # (N, C, h, w) x (O, C) -> (N, h, w, O)
        out += np.tensordot(xp[:, :, rs, cs], wd[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def backward(g):
        gx = gw = gb = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i, j, rs, cs in taps:
                gxp[:, :, rs, cs] += np.tensordot(g, wd[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding:padding + h, padding:padding + w]
        if weight.requires_grad:
            gw = np.empty_like(wd)
            for i, j, rs, cs in taps:
                gw[:, :, i, j] = np.tensordot(g, xp[:, :, rs, cs], axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make(out, parents, backward)


def relu(x):
    mask = x.data > 0
    return make(x.data * mask, (x,), lambda g: (g * mask,))


def sigmoid(x):
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make(out, (x,), lambda g: (g * out * (1.0 - out),))


def maxpool2(x):
    """2x2 max pooling, stride 2. Gradient goes to the first maximum of each window."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    win = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        gw = np.zeros_like(win)
        np.put_along_axis(gw, idx[..., None], g[..., None], axis=-1)
        gw = gw.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (gw,)

    return make(out, (x,), backward)


def upsample2(x):
    """Nearest-neighbour 2x upsampling."""
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    return make(out, (x,), lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),))


def gated_residual(x, att, gamma):
    """``gamma * x * att + x`` with ``att`` of shape (N, 1, h, w) broadcast over channels."""
    prod = x.data * att.data
    out = gamma.data * prod + x.data

    def backward(g):
        gx = g * (gamma.data * att.data + 1.0) if x.requires_grad else None
        ga = (g * gamma.data * x.data).sum(axis=1, keepdims=True) if att.requires_grad else None
        gg = np.reshape((g * prod).sum(), gamma.shape) if gamma.requires_grad else None
        return gx, ga, gg

    return make(out, (x, att, gamma), backward)


def soft_argmax(x, beta):
    """Softmax-weighted mean cell position of each channel.

    ``x`` is ``(N, C, h, w)``; returns ``(N, C, 2)`` holding ``(u, v)`` where a
    cell in column ``i`` and row ``j`` sits at ``(i / w, j / h)``.
    """
    if not beta > 0:
        raise DomainError(f"beta must be > 0, got {beta}")
    n, c, h, w = x.shape
    logits = beta * x.data.reshape(n, c, h * w)
    logits = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    cols, rows = np.meshgrid(np.arange(w) / w, np.arange(h) / h)
    grid = np.stack([cols.ravel(), rows.ravel()], axis=1)   # (h*w, 2)
    out = p @ grid

    def backward(g):
        # d out_k / d logit_m = p_m (grid_mk - out_k)
        gp = g @ grid.T                                    # (N, C, h*w)
        glogit = p * (gp - (gp * p).sum(axis=-1, keepdims=True))
        return ((beta * glogit).reshape(n, c, h, w),)

    return make(out, (x,), backward)
