"""Omnidirectional saliency and scanpath prediction toolkit."""

from .data import Scanpath, synthesize_scene
from .fusion import FusionConfig, joint_merge, linear_scale, salypath_pipeline, unbias
from .heatmap import (EquatorBiasConfig, KernelConfig, aggregate_scanpaths, equator_bias,
                      fixation_map, scanpath_to_map)

__version__ = "0.1.0"

__all__ = [
    "Scanpath", "synthesize_scene",
    "FusionConfig", "joint_merge", "linear_scale", "salypath_pipeline", "unbias",
    "EquatorBiasConfig", "KernelConfig", "aggregate_scanpaths", "equator_bias",
    "fixation_map", "scanpath_to_map",
]
