"""Minimal numpy network: autodiff engine, layers, model, losses and training."""

from .autograd import Tensor
from .layers import conv2d, gated_residual, maxpool2, relu, sigmoid, soft_argmax, upsample2
from .losses import loss_l1, loss_l2
from .model import (ModelConfig, NetworkParams, attention_map, attention_refine, forward,
                    init_params, predict)
from .train import OptimizerConfig, TrainingBatch, train_stage1, train_stage2
from .gradcheck import grad_check

__all__ = [
    "Tensor", "conv2d", "gated_residual", "maxpool2", "relu", "sigmoid", "soft_argmax", "upsample2",
    "loss_l1", "loss_l2", "ModelConfig", "NetworkParams", "attention_map", "attention_refine",
    "forward", "init_params", "predict", "OptimizerConfig", "TrainingBatch",
    "train_stage1", "train_stage2", "grad_check",
]
