"""Patch-based scene-text erasing toolkit.

An encoder-decoder convolutional network (implemented from scratch on
numpy, with an optional compiled kernel core) erases text from 64x64
image patches; a sliding-window pipeline stitches whole images; a
synthetic data factory renders training corpora; evaluation covers
detection-box and pixel-level metrics.
"""

from .kernels import BACKEND
from .model import (EraserModel, TrainBatch, TrainConfig, forward,
                    init_model, load_model, save_model, train_step)
from .pipeline import TilePlan, erase_image, plan_tiles
from .tensor import ConvParams, ShapeMismatchError

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvParams",
    "EraserModel",
    "ShapeMismatchError",
    "TilePlan",
    "TrainBatch",
    "TrainConfig",
    "erase_image",
    "forward",
    "init_model",
    "load_model",
    "plan_tiles",
    "save_model",
    "train_step",
    "__version__",
]
