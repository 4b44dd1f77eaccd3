"""Desk-scale ablation of the fusion stage on synthetic scenes.

For each scene the ground truth aggregates many sampled scanpaths, the
primary map is that ground truth degraded by blur and noise, and the
scanpath map comes from one held-out scanpath.  Viewers follow the random
walk model by default: an i.i.d. scanpath of 100 fixations already
reconstructs the ground truth almost perfectly, which no real single
viewer does.  The scanpath map S, the joint map J and the unbiased joint
map J* are then scored against the ground truth.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import synthesize_scene
from .fusion import FusionConfig, joint_merge, unbias
from .heatmap import (EquatorBiasConfig, KernelConfig, aggregate_scanpaths, equator_bias, fixation_map,
                      scanpath_to_map)
from .metrics import saliency_report

STAGES = ("S", "J", "J*")


@dataclass
class AblationResult:
    scenes: list = field(default_factory=list)   # one {stage: {metric: value}} per scene

    def values(self, stage, metric):
        return np.array([s[stage][metric] for s in self.scenes])

    def mean_table(self):
        metrics = self.scenes[0]["S"].keys()
        return {stage: {m: float(self.values(stage, m).mean()) for m in metrics} for stage in STAGES}


def degrade(m, rng, blur_px=3.0, noise=0.1):
    """Blur (wrapping in longitude) and add clipped Gaussian noise."""
    out = gaussian_filter(m, sigma=blur_px, mode=("nearest", "wrap"))
    out = out + noise * rng.standard_normal(m.shape)
    return np.clip(out, 0.0, None)


def merge_ablation(n_scenes=20, width=128, height=64, n_gt_scanpaths=32, seed=0,
                   fusion=FusionConfig(), kernel=KernelConfig(), bias=EquatorBiasConfig(),
                   blur_px=3.0, noise=0.1, viewer="walk"):
    """Score S, J and J* on ``n_scenes`` synthetic scenes.

    Each scene draws ``n_gt_scanpaths + 1`` scanpaths; all but the last build
    the ground truth and its fixation map, the last one builds S.
    """
    rng = np.random.default_rng(seed)
    e = equator_bias(width, height, bias)
    result = AblationResult()
    for k in range(n_scenes):
        scene = synthesize_scene(seed * 100_003 + k, width, height, n_scanpaths=n_gt_scanpaths + 1,
                                 viewer=viewer)
        gt_paths, held_out = scene.scanpaths[:-1], scene.scanpaths[-1]
        gt = aggregate_scanpaths(gt_paths, width, height, kernel)
        fix = fixation_map(gt_paths, width, height)
        t = degrade(gt, rng, blur_px, noise)
        s = scanpath_to_map(held_out, width, height, kernel)
        j = joint_merge(t, s, fusion)
        j_star = unbias(j, e)
        result.scenes.append({name: saliency_report(m, gt, fix, seed=seed + k)
                              for name, m in zip(STAGES, (s, j, j_star))})
    return result
