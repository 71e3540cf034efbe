"""Forward/backward numeric operations every other module composes.

Convolution halves the spatial size, transposed convolution doubles it
(kernel 4x4, stride 2, padding 1 throughout). Each function accepts a
single rank-3 tensor (C, H, W) or a rank-4 batch (B, C, H, W) and returns
the matching rank. All operations are pure; double precision end to end.
"""

import numpy as np

from . import kernels
from .tensor import DTYPE, GradBundle, ShapeMismatchError, STRIDE


def _batched(x, name: str):
    """Normalize to (B, C, H, W); return (array, had_batch_axis)."""
    x = np.ascontiguousarray(x, dtype=DTYPE)
    if x.ndim == 3:
        return x[None], False
    if x.ndim == 4:
        return x, True
    raise ShapeMismatchError(f"{name} must be rank 3 or 4, got shape {x.shape}")


def _check_conv_input(x, p, name="input"):
    if x.shape[1] != p.in_channels:
        raise ShapeMismatchError(
            f"{name} has {x.shape[1]} channels but layer expects "
            f"{p.in_channels} (input shape {x.shape[1:]}, "
            f"weights shape {p.weights.shape})")


def conv_forward(x, p):
    """Strided convolution: (C, H, W) -> (out_channels, H/2, W/2).

    H and W must be even and >= 2 so the halved shape is exact.
    """
    xb, batched = _batched(x, "input")
    _check_conv_input(xb, p)
    h, w = xb.shape[2], xb.shape[3]
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise ShapeMismatchError(
            f"spatial size must be even and >= 2, got {h}x{w}")
    y = kernels.conv_fwd(xb, p.weights, p.bias)
    return y if batched else y[0]


def conv_backward(x, p, d_output):
    """Exact analytic gradients of conv_forward."""
    xb, batched = _batched(x, "input")
    _check_conv_input(xb, p)
    gyb, gbatched = _batched(d_output, "d_output")
    expected = (xb.shape[0], p.out_channels, xb.shape[2] // STRIDE, xb.shape[3] // STRIDE)
    if gyb.shape != expected or batched != gbatched:
        raise ShapeMismatchError(
            f"d_output shape {d_output.shape} does not match forward output "
            f"{expected[1:] if not batched else expected}")
    gx, gw, gb = kernels.conv_bwd(xb, p.weights, gyb)
    return GradBundle(gx if batched else gx[0], gw, gb)


def deconv_forward(x, p):
    """Transposed convolution: (C, H, W) -> (out_channels, 2H, 2W).

    The adjoint of conv_forward's linear map: scatter each input cell
    through the 4x4 kernel at stride 2, crop 1 from each border, add bias.
    """
    xb, batched = _batched(x, "input")
    _check_conv_input(xb, p)
    y = kernels.deconv_fwd(xb, p.weights, p.bias)
    return y if batched else y[0]


def deconv_backward(x, p, d_output):
    """Exact analytic gradients of deconv_forward."""
    xb, batched = _batched(x, "input")
    _check_conv_input(xb, p)
    gyb, gbatched = _batched(d_output, "d_output")
    expected = (xb.shape[0], p.out_channels, STRIDE * xb.shape[2], STRIDE * xb.shape[3])
    if gyb.shape != expected or batched != gbatched:
        raise ShapeMismatchError(
            f"d_output shape {d_output.shape} does not match forward output "
            f"{expected[1:] if not batched else expected}")
    gx, gw, gb = kernels.deconv_bwd(xb, p.weights, gyb)
    return GradBundle(gx if batched else gx[0], gw, gb)


def relu(x):
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=DTYPE), 0.0)


def relu_backward(x, d_output):
    """Pass d_output where x > 0, else 0."""
    x = np.asarray(x, dtype=DTYPE)
    g = np.asarray(d_output, dtype=DTYPE)
    if g.shape != x.shape:
        raise ShapeMismatchError(
            f"d_output shape {g.shape} does not match input shape {x.shape}")
    return np.where(x > 0.0, g, 0.0)


def skip_merge(x1, x2):
    """Skip-sum junction: elementwise max(0, x1 + x2).

    Both operands must have identical shapes; that symmetry is what makes
    the conv half and deconv half line up.
    """
    a = np.asarray(x1, dtype=DTYPE)
    b = np.asarray(x2, dtype=DTYPE)
    if a.shape != b.shape:
        raise ShapeMismatchError(
            f"skip_merge operands differ in shape: {a.shape} vs {b.shape}")
    return np.maximum(a + b, 0.0)


def skip_merge_backward(x1, x2, d_output):
    """Gradient flowing to each branch: d_output gated by (x1 + x2) > 0."""
    a = np.asarray(x1, dtype=DTYPE)
    b = np.asarray(x2, dtype=DTYPE)
    g = np.asarray(d_output, dtype=DTYPE)
    if a.shape != b.shape or g.shape != a.shape:
        raise ShapeMismatchError(
            f"shape mismatch: {a.shape}, {b.shape}, {g.shape}")
    gate = np.where((a + b) > 0.0, g, 0.0)
    return gate, gate.copy()


def mse_loss(pred, target):
    """Mean (over samples) of the per-sample sum of squared errors.

    Rank-3 inputs are a single sample (N=1); rank-4 inputs average over the
    leading axis. Returns (loss, d_pred).
    """
    p = np.asarray(pred, dtype=DTYPE)
    t = np.asarray(target, dtype=DTYPE)
    if p.shape != t.shape:
        raise ShapeMismatchError(
            f"pred shape {p.shape} does not match target shape {t.shape}")
    if p.ndim not in (3, 4):
        raise ShapeMismatchError(f"expected rank 3 or 4, got shape {p.shape}")
    n = p.shape[0] if p.ndim == 4 else 1
    diff = p - t
    loss = float(np.sum(diff * diff) / n)
    return loss, (2.0 / n) * diff
