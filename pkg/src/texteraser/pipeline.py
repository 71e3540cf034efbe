"""Whole-image erasure by sliding 64x64 windows at stride 32.

Each model output contributes only its central 32x32; with a 16-pixel
reflect pad on the left/top (and enough on the right/bottom), those
centers partition the original image exactly, so every pixel is written
once.
"""

import math
from dataclasses import dataclass

import numpy as np

from .netpbm import image_to_tensor, tensor_to_image
from .tensor import DTYPE

WINDOW = 64
STRIDE = 32
MARGIN = 16  # window border discarded on every side


@dataclass(frozen=True)
class TilePlan:
    width: int
    height: int
    padded_width: int
    padded_height: int
    pad_left: int
    pad_top: int
    origins: tuple  # (x, y) window corners in padded coordinates


def plan_tiles(width: int, height: int) -> TilePlan:
    """Tile layout whose window centers partition a width x height image."""
    if width < 1 or height < 1:
        raise ValueError(f"image size {width}x{height} must be at least 1x1")
    nx = math.ceil(width / STRIDE)
    ny = math.ceil(height / STRIDE)
    origins = tuple((x, y)
                    for y in range(0, ny * STRIDE, STRIDE)
                    for x in range(0, nx * STRIDE, STRIDE))
    return TilePlan(width=width, height=height,
                    padded_width=nx * STRIDE + WINDOW - STRIDE,
                    padded_height=ny * STRIDE + WINDOW - STRIDE,
                    pad_left=MARGIN, pad_top=MARGIN, origins=origins)


def _pad(image: np.ndarray, plan: TilePlan) -> np.ndarray:
    pads = ((plan.pad_top, plan.padded_height - plan.height - plan.pad_top),
            (plan.pad_left, plan.padded_width - plan.width - plan.pad_left),
            (0, 0))
    # reflect needs at least 2 samples on the axis; fall back to edge
    out = image
    for axis in (0, 1):
        width = [(0, 0), (0, 0), (0, 0)]
        width[axis] = pads[axis]
        mode = "reflect" if image.shape[axis] > 1 else "edge"
        out = np.pad(out, width, mode=mode)
    return out


def erase_image(image: np.ndarray, model, return_counts: bool = False):
    """Run the model over every tile and stitch the 32x32 centers.

    model is any callable mapping a (3, 64, 64) tensor to one of the same
    shape. Output dimensions equal input dimensions; values are quantized
    to 0..255 at the end only.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(
            f"expected uint8 (H, W, 3) image, got {image.dtype} {image.shape}")
    h, w = image.shape[:2]
    plan = plan_tiles(w, h)
    padded = _pad(image, plan)
    canvas = np.zeros((3, plan.padded_height, plan.padded_width), dtype=DTYPE)
    counts = np.zeros((plan.padded_height, plan.padded_width), dtype=np.int64)
    for x, y in plan.origins:
        tile = image_to_tensor(padded[y:y + WINDOW, x:x + WINDOW])
        out = np.asarray(model(tile))
        if out.shape != tile.shape:
            raise ValueError(
                f"model returned shape {out.shape}, expected {tile.shape}")
        cy, cx = y + MARGIN, x + MARGIN
        canvas[:, cy:cy + STRIDE, cx:cx + STRIDE] = \
            out[:, MARGIN:MARGIN + STRIDE, MARGIN:MARGIN + STRIDE]
        counts[cy:cy + STRIDE, cx:cx + STRIDE] += 1
    crop = canvas[:, plan.pad_top:plan.pad_top + h,
                  plan.pad_left:plan.pad_left + w]
    result = tensor_to_image(crop)
    if return_counts:
        return result, counts[plan.pad_top:plan.pad_top + h,
                              plan.pad_left:plan.pad_left + w]
    return result
