"""Dense tensor container and layer parameter types.

A tensor is a C-contiguous float64 numpy array of shape (channels, height,
width): channel-major, then row-major, exactly the flat layout the weight
file format assumes. Batches are rank-4 arrays with the sample axis first.
"""

from dataclasses import dataclass, field

import numpy as np

DTYPE = np.float64

# Layer geometry is fixed for the whole artifact.
KERNEL = 4
STRIDE = 2
PADDING = 1


class ShapeMismatchError(ValueError):
    """A tensor or parameter block has a shape the operation cannot accept."""


def as_tensor(data) -> np.ndarray:
    """Validate and normalize a rank-3 (C, H, W) tensor."""
    t = np.ascontiguousarray(data, dtype=DTYPE)
    if t.ndim != 3:
        raise ShapeMismatchError(f"expected rank-3 tensor, got shape {t.shape}")
    if min(t.shape) < 1:
        raise ShapeMismatchError(f"all dimensions must be >= 1, got shape {t.shape}")
    return t


def zeros(channels: int, height: int, width: int) -> np.ndarray:
    return np.zeros((channels, height, width), dtype=DTYPE)


@dataclass
class ConvParams:
    """Weights and bias of one (de)convolution layer.

    weights: (out_channels, in_channels, 4, 4); bias: (out_channels,).
    Stride 2 and padding 1 are constants of this artifact; they are stored
    so the contract is visible, but any other value is rejected.
    """

    weights: np.ndarray
    bias: np.ndarray
    stride: int = STRIDE
    padding: int = PADDING

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=DTYPE)
        self.bias = np.ascontiguousarray(self.bias, dtype=DTYPE)
        if self.weights.ndim != 4 or self.weights.shape[2:] != (KERNEL, KERNEL):
            raise ShapeMismatchError(
                f"weights must be (out, in, {KERNEL}, {KERNEL}), got {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatchError(
                f"bias shape {self.bias.shape} does not match "
                f"out_channels {self.weights.shape[0]}")
        if self.stride != STRIDE or self.padding != PADDING:
            raise ShapeMismatchError(
                f"stride/padding are fixed at {STRIDE}/{PADDING}, "
                f"got {self.stride}/{self.padding}")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "ConvParams":
        return ConvParams(self.weights.copy(), self.bias.copy())


@dataclass
class GradBundle:
    """Gradients of one layer application: input, weights, bias."""

    d_input: np.ndarray
    d_weights: np.ndarray
    d_bias: np.ndarray = field(default=None)
