from glntsp.gln.adam import AdamState, adam_step
from glntsp.gln.loss import LossConfig, hed_loss, iou_loss, total_loss
from glntsp.gln.model import (
    ForwardTrace,
    GlnConfig,
    GlnParams,
    LayerParams,
    backward,
    forward,
    init_adjacency,
    init_params,
    kernel_conv,
    normalize_adjacency,
)

__all__ = [
    "AdamState",
    "ForwardTrace",
    "GlnConfig",
    "GlnParams",
    "LayerParams",
    "LossConfig",
    "adam_step",
    "backward",
    "forward",
    "hed_loss",
    "init_adjacency",
    "init_params",
    "iou_loss",
    "kernel_conv",
    "normalize_adjacency",
    "total_loss",
]
