"""Finite-difference checks covering every backward pass of the network.

Each check builds a small random problem, projects the op output onto a
fixed random tensor (so every output element contributes) and compares the
gradient with central differences.  Parameters get random biases so no
pre-activation sits exactly on a ReLU kink.
"""

import numpy as np

from .autograd import Tensor
from .gradcheck import grad_check
from .layers import conv2d, gated_residual, maxpool2, relu, sigmoid, soft_argmax, upsample2
from .losses import loss_l1, loss_l2
from .model import ModelConfig, attention_map, attention_refine, forward, init_params

CHECK_CONFIG = ModelConfig(width=32, height=16, encoder_widths=(4, 4, 6, 6), decoder_widths=(6, 4, 4, 4),
                           attention_width=4, aux_widths=(6,), n_fixations=5, beta=3.0)


def _projected(fn, out_shape, rng):
    r = Tensor(rng.normal(size=out_shape))
    return lambda: (fn() * r).sum()


def layer_checks(seed=0, n_coords=60):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(2, 3, 8, 8)))
    w = Tensor(rng.normal(size=(4, 3, 3, 3)))
    b = Tensor(rng.normal(size=4))
    w1 = Tensor(rng.normal(size=(2, 3, 1, 1)))
    results = {}

    def conv():
        return conv2d(x, w, b)

    def conv_dilated():
        return conv2d(x, w, b, padding=2, dilation=2)

    def conv_1x1():
        return conv2d(x, w1, None, padding=0)

    for name, fn, params in (("conv2d", conv, [x, w, b]),
                             ("conv2d_dilated", conv_dilated, [x, w, b]),
                             ("conv2d_1x1", conv_1x1, [x, w1])):
        results[name] = grad_check(_projected(fn, fn().shape, rng), params, n_coords, seed=seed)

    for name, op in (("relu", relu), ("sigmoid", sigmoid), ("maxpool2", maxpool2), ("upsample2", upsample2)):
        fn = lambda op=op: op(x)
        results[name] = grad_check(_projected(fn, fn().shape, rng), [x], n_coords, seed=seed)

    att = Tensor(rng.uniform(size=(2, 1, 8, 8)))
    gamma = Tensor(np.array(0.7))
    fn = lambda: gated_residual(x, att, gamma)
    results["gated_residual"] = grad_check(_projected(fn, fn().shape, rng), [x, att, gamma], n_coords, seed=seed)

    fn = lambda: soft_argmax(x, 2.0)
    results["soft_argmax"] = grad_check(_projected(fn, fn().shape, rng), [x], n_coords, seed=seed)
    return results


def model_checks(seed=0, n_coords=60, cfg=CHECK_CONFIG):
    rng = np.random.default_rng(seed)
    params = init_params(cfg, seed=seed, gamma=0.5, bias_std=0.1)
    h, w = cfg.height, cfg.width
    image = rng.uniform(size=(1, 3, h, w))
    gt = rng.uniform(0.05, 1.0, size=(1, 1, h, w))
    fix = (rng.uniform(size=(1, 1, h, w)) < 0.1).astype(float)
    fix[0, 0, 0, 0] = 1.0
    target = rng.uniform(size=(1, cfg.n_fixations, 2))
    att = params.groups["attention"]
    results = {}

    # attention_refine alone, on a random bottleneck
    x = Tensor(rng.normal(size=(1, cfg.encoder_widths[-1], h // 16, w // 16)))
    fn = lambda: attention_refine(params, x, cfg)
    proj = _projected(fn, fn().shape, rng)
    results["attention_refine"] = grad_check(proj, [x] + list(att.values()), n_coords, seed=seed)
    results["attention_refine_gamma"] = grad_check(proj, [att["gamma"]], 1, seed=seed)
    fn = lambda: attention_map(params, x, cfg)
    results["attention_map"] = grad_check(_projected(fn, fn().shape, rng), [x], n_coords, seed=seed)

    def l1():
        sal, _ = forward(params, image, cfg, scanpath=False)
        return loss_l1(sal, gt, fix)

    def l2():
        _, coords = forward(params, image, cfg, saliency=False)
        return loss_l2(coords, target)

    saliency_params = [t for _, t in params.named(("encoder", "attention", "decoder"))]
    scanpath_params = [t for _, t in params.named(("encoder", "attention", "aux"))]
    results["loss_l1_full"] = grad_check(l1, saliency_params, n_coords, seed=seed)
    results["loss_l1_gamma"] = grad_check(l1, [att["gamma"]], 1, seed=seed)
    results["loss_l2_full"] = grad_check(l2, scanpath_params, n_coords, seed=seed)

    yhat = Tensor(rng.uniform(0.05, 0.95, size=(1, 1, 8, 16)))
    small_fix = fix[..., :8, :16].copy()
    small_fix[0, 0, 0, 3] = 1.0
    results["loss_l1_direct"] = grad_check(lambda: loss_l1(yhat, gt[..., :8, :16], small_fix),
                                           [yhat], n_coords, seed=seed)
    coords = Tensor(rng.uniform(size=(1, cfg.n_fixations, 2)))
    results["loss_l2_direct"] = grad_check(lambda: loss_l2(coords, target), [coords], n_coords, seed=seed)
    return results


def run_all(seed=0, n_coords=60):
    """``(name, max relative error)`` for every check, in a stable order."""
    out = list(layer_checks(seed, n_coords).items())
    out += list(model_checks(seed, n_coords).items())
    return out
