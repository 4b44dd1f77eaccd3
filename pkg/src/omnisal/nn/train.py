"""Two-stage training: saliency branch first, then the auxiliary head on frozen features."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..data import Scene
from ..errors import DomainError, ShapeError
from ..heatmap import fixation_map
from .autograd import Tensor
from .losses import loss_l1, loss_l2
from .model import ModelConfig, NetworkParams, attention_refine, aux_heatmaps, decode, encode
from .layers import soft_argmax
from .optim import Adam

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-4
    steps: int = 200


@dataclass
class TrainingBatch:
    """Full-batch arrays: images (N,3,H,W), maps (N,1,H,W), fixation maps, target coords (N,F,2)."""

    images: np.ndarray
    gt_maps: np.ndarray
    fix_maps: np.ndarray
    targets: np.ndarray

    @classmethod
    def from_scenes(cls, scenes: Sequence[Scene], n_fixations=100, target_user=0):
        """Stack scenes; the scanpath at index ``target_user`` is each scene's L2 target."""
        if len(scenes) == 0:
            raise DomainError("empty dataset")
        images, maps, fixes, targets = [], [], [], []
        for sc in scenes:
            h, w = sc.gt_map.shape
            images.append(sc.image)
            maps.append(sc.gt_map[None])
            fixes.append(fixation_map(sc.scanpaths, w, h)[None])
            tgt = sc.scanpaths[target_user].points
            if len(tgt) != n_fixations:
                raise ShapeError(f"target scanpath has {len(tgt)} fixations, model predicts {n_fixations}")
            targets.append(tgt)
        return cls(np.stack(images), np.stack(maps), np.stack(fixes), np.stack(targets))


def _as_batch(dataset, cfg):
    if isinstance(dataset, TrainingBatch):
        return dataset
    return TrainingBatch.from_scenes(dataset, cfg.n_fixations)


def saliency_loss(params, batch, cfg):
    refined = attention_refine(params, encode(params, batch.images), cfg)
    return loss_l1(decode(params, refined), batch.gt_maps, batch.fix_maps)


def train_stage1(params: NetworkParams, dataset, cfg: ModelConfig, opt=OptimizerConfig(), history=None):
    """Fit encoder, attention module and decoder to the saliency loss.

    ``history``, if given, receives the loss before each update and the final loss.
    """
    batch = _as_batch(dataset, cfg)
    params.unfreeze("encoder", "attention", "decoder")
    params.freeze("aux")
    adam = Adam(params.trainable(), lr=opt.lr)
    for step in range(opt.steps):
        adam.zero_grad()
        loss = saliency_loss(params, batch, cfg)
        loss.backward()
        adam.step()
        if history is not None:
            history.append(loss.item())
        log.debug("stage1 step %d loss %.6f", step, loss.item())
    if history is not None:
        history.append(saliency_loss(params, batch, cfg).item())
    return params


def train_stage2(params: NetworkParams, dataset, cfg: ModelConfig, opt=OptimizerConfig(), history=None):
    """Fit the auxiliary head to the scanpath loss with encoder and attention frozen.

    The decoder takes no part in this loss and is frozen as well.
    """
    batch = _as_batch(dataset, cfg)
    params.freeze("encoder", "attention", "decoder")
    params.unfreeze("aux")
    # frozen upstream: the refined bottleneck is a constant for this stage
    refined = Tensor(attention_refine(params, encode(params, batch.images), cfg).data)
    adam = Adam(params.trainable(), lr=opt.lr)

    def loss_fn():
        coords = soft_argmax(aux_heatmaps(params, refined, cfg), cfg.beta)
        return loss_l2(coords, batch.targets)

    for step in range(opt.steps):
        adam.zero_grad()
        loss = loss_fn()
        loss.backward()
        adam.step()
        if history is not None:
            history.append(loss.item())
        log.debug("stage2 step %d loss %.6f", step, loss.item())
    if history is not None:
        history.append(loss_fn().item())
    return params
