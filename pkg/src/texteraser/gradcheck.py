"""Finite-difference verification of every backward kernel.

For each operation the analytic gradient of L = <f(theta), g> (with g a
fixed random upstream gradient) is compared entry by entry against central
differences with step 1e-5 at double precision. The reported number is the
worst relative error, falling back to absolute error when the comparison
denominator drops below 1e-8.
"""

import numpy as np

from . import ops
from .model import backward, forward, init_model
from .tensor import ConvParams, DTYPE

FD_STEP = 1e-5
ABS_FLOOR = 1e-8
TOLERANCE = 1e-4

# Reduced-depth plan for whole-network checks; full channel widths would
# only slow the sweep down without exercising anything new.
REDUCED_PLAN = (3, 6, 10)


def _compare(analytic, numeric):
    analytic = np.asarray(analytic, dtype=DTYPE).ravel()
    numeric = np.asarray(numeric, dtype=DTYPE).ravel()
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    rel = np.where(denom < ABS_FLOOR, err, err / np.maximum(denom, ABS_FLOOR))
    return float(rel.max()) if rel.size else 0.0


def _fd_sweep(arr, loss_fn, step=FD_STEP):
    """Central-difference dL/d(arr) by perturbing every entry."""
    grad = np.zeros_like(arr, dtype=DTYPE)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        hi = loss_fn()
        flat[idx] = orig - step
        lo = loss_fn()
        flat[idx] = orig
        gflat[idx] = (hi - lo) / (2.0 * step)
    return grad


def _away_from_zero(rng, shape, margin=0.05):
    """Uniform values with |x| in [margin, 1): keeps FD clear of ReLU kinks."""
    mag = rng.uniform(margin, 1.0, size=shape)
    sign = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return mag * sign


def _check_layer(kind, shapes, seed):
    in_ch, h, w, out_ch = shapes
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(in_ch, h, w))
    p = ConvParams(rng.uniform(-0.5, 0.5, size=(out_ch, in_ch, 4, 4)),
                   rng.uniform(-0.5, 0.5, size=out_ch))
    if kind == "conv":
        fwd, bwd = ops.conv_forward, ops.conv_backward
    else:
        fwd, bwd = ops.deconv_forward, ops.deconv_backward
    gy = rng.uniform(-1.0, 1.0, size=fwd(x, p).shape)

    bundle = bwd(x, p, gy)

    def loss():
        return float(np.sum(fwd(x, p) * gy))

    worst = _compare(bundle.d_input, _fd_sweep(x, loss))
    worst = max(worst, _compare(bundle.d_weights, _fd_sweep(p.weights, loss)))
    worst = max(worst, _compare(bundle.d_bias, _fd_sweep(p.bias, loss)))
    return worst


def _check_relu(shapes, seed):
    rng = np.random.default_rng(seed)
    x = _away_from_zero(rng, shapes)
    gy = rng.uniform(-1.0, 1.0, size=shapes)
    analytic = ops.relu_backward(x, gy)

    def loss():
        return float(np.sum(ops.relu(x) * gy))

    return _compare(analytic, _fd_sweep(x, loss))


def _check_skip(shapes, seed):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(-1.0, 1.0, size=shapes)
    # choose x2 so the sums sit away from the kink
    x2 = _away_from_zero(rng, shapes) - x1
    gy = rng.uniform(-1.0, 1.0, size=shapes)
    g1, g2 = ops.skip_merge_backward(x1, x2, gy)

    def loss():
        return float(np.sum(ops.skip_merge(x1, x2) * gy))

    worst = _compare(g1, _fd_sweep(x1, loss))
    return max(worst, _compare(g2, _fd_sweep(x2, loss)))


def _check_mse(shapes, seed):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(-1.0, 1.0, size=shapes)
    target = rng.uniform(-1.0, 1.0, size=shapes)
    _, d_pred = ops.mse_loss(pred, target)

    def loss():
        return ops.mse_loss(pred, target)[0]

    return _compare(d_pred, _fd_sweep(pred, loss))


def _check_net(shapes, seed, plan=REDUCED_PLAN):
    """Whole-network check: loss gradients of every parameter by FD."""
    rng = np.random.default_rng(seed)
    model = init_model(seed, plan=plan)
    x = rng.uniform(0.0, 1.0, size=shapes)
    target = rng.uniform(0.0, 1.0, size=shapes)

    out, tape = forward(model, x, record=True)
    _, d_out = ops.mse_loss(out, target)
    conv_grads, deconv_grads = backward(model, tape, d_out)

    def loss():
        return ops.mse_loss(forward(model, x)[0], target)[0]

    worst = 0.0
    for p, (gw, gb) in zip(model.conv_layers, conv_grads):
        worst = max(worst, _compare(gw, _fd_sweep(p.weights, loss)))
        worst = max(worst, _compare(gb, _fd_sweep(p.bias, loss)))
    for p, (gw, gb) in zip(model.deconv_layers, deconv_grads):
        worst = max(worst, _compare(gw, _fd_sweep(p.weights, loss)))
        worst = max(worst, _compare(gb, _fd_sweep(p.bias, loss)))
    return worst


def grad_check(layer_kind: str, shapes, seed: int = 0) -> float:
    """Return the worst relative error for one layer kind.

    layer_kind: conv | deconv | relu | skip | mse | net. For conv/deconv,
    shapes is (in_channels, height, width, out_channels); otherwise the
    tensor shape (net requires a (3, N, N) input with N a multiple of 4).
    """
    if layer_kind in ("conv", "deconv"):
        return _check_layer(layer_kind, shapes, seed)
    if layer_kind == "relu":
        return _check_relu(tuple(shapes), seed)
    if layer_kind == "skip":
        return _check_skip(tuple(shapes), seed)
    if layer_kind == "mse":
        return _check_mse(tuple(shapes), seed)
    if layer_kind == "net":
        return _check_net(tuple(shapes), seed)
    raise ValueError(f"unknown layer kind {layer_kind!r}")


def full_suite(seed: int = 0):
    """The standard verification sweep; returns {name: max_relative_error}."""
    return {
        "conv": grad_check("conv", (2, 6, 6, 3), seed),
        "deconv": grad_check("deconv", (2, 3, 3, 3), seed),
        "relu": grad_check("relu", (2, 4, 4), seed),
        "skip": grad_check("skip", (2, 4, 4), seed),
        "mse": grad_check("mse", (2, 4, 4), seed),
        "net": grad_check("net", (3, 8, 8), seed),
    }
