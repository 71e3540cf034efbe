"""The 4-conv/4-deconv skip-sum eraser network.

Channel plan 3 -> 32 -> 64 -> 128 -> 256 and back; every layer 4x4 kernel,
stride 2, padding 1. Skip junctions sum each deconv output with its
same-shaped conv partner and apply ReLU; the final deconv has an identity
head. Training is plain SGD on the sample-mean squared-error loss.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .tensor import ConvParams, DTYPE, KERNEL, ShapeMismatchError

DEFAULT_PLAN = (3, 32, 64, 128, 256)
WEIGHT_MAGIC = b"TXERASE1"


class WeightFormatError(ValueError):
    """A weight file failed validation against the fixed architecture."""


class NonFiniteLossError(FloatingPointError):
    """Training produced a NaN or infinite loss."""


@dataclass
class EraserModel:
    conv_layers: list
    deconv_layers: list

    def __post_init__(self):
        if len(self.conv_layers) != len(self.deconv_layers):
            raise ShapeMismatchError(
                f"conv/deconv halves must pair up, got "
                f"{len(self.conv_layers)} vs {len(self.deconv_layers)}")
        for i in range(len(self.conv_layers) - 1):
            a, b = self.conv_layers[i], self.conv_layers[i + 1]
            if a.out_channels != b.in_channels:
                raise ShapeMismatchError(
                    f"conv layer {i} emits {a.out_channels} channels but "
                    f"layer {i + 1} expects {b.in_channels}")
        for conv, deconv in zip(self.conv_layers, reversed(self.deconv_layers)):
            if (conv.in_channels != deconv.out_channels
                    or conv.out_channels != deconv.in_channels):
                raise ShapeMismatchError(
                    "deconv half does not mirror the conv half: "
                    f"conv {conv.in_channels}->{conv.out_channels} vs "
                    f"deconv {deconv.in_channels}->{deconv.out_channels}")

    @property
    def plan(self):
        return tuple([self.conv_layers[0].in_channels]
                     + [p.out_channels for p in self.conv_layers])

    @property
    def depth(self):
        return len(self.conv_layers)

    def parameters(self):
        return list(self.conv_layers) + list(self.deconv_layers)

    def __call__(self, patch):
        out, _ = forward(self, patch)
        return out


@dataclass
class TrainBatch:
    """Aligned input/target patch lists; all values in [0, 1]."""

    inputs: list
    targets: list

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ShapeMismatchError(
                f"{len(self.inputs)} inputs vs {len(self.targets)} targets")

    def __len__(self):
        return len(self.inputs)

    def stacked(self):
        return (np.ascontiguousarray(np.stack(self.inputs), dtype=DTYPE),
                np.ascontiguousarray(np.stack(self.targets), dtype=DTYPE))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 16
    max_steps: int = 1000
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class ForwardTape:
    """Activations recorded for backward: input, conv outputs, merged outputs."""

    input: np.ndarray
    conv_acts: list = field(default_factory=list)
    merged: list = field(default_factory=list)
    output: np.ndarray = None

    @property
    def spatial_sizes(self):
        """Per-layer output spatial size, conv half then deconv half."""
        acts = self.conv_acts + self.merged + [self.output]
        return [a.shape[-1] for a in acts]


def init_model(seed: int, plan=DEFAULT_PLAN) -> EraserModel:
    """Seeded Glorot-uniform weights, zero biases.

    Per layer the bound is sqrt(6 / (fan_in + fan_out)) with
    fan = channels * kernel_area. Deterministic: conv layers are drawn
    first, then deconv layers.
    """
    rng = np.random.default_rng(seed)

    def draw(out_ch, in_ch):
        fan_in = in_ch * KERNEL * KERNEL
        fan_out = out_ch * KERNEL * KERNEL
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(out_ch, in_ch, KERNEL, KERNEL))
        return ConvParams(w, np.zeros(out_ch))

    conv = [draw(plan[i + 1], plan[i]) for i in range(len(plan) - 1)]
    deconv = [draw(plan[i - 1], plan[i]) for i in range(len(plan) - 1, 0, -1)]
    return EraserModel(conv, deconv)


def forward(model: EraserModel, patch, record: bool = False):
    """Run the network on a (3, 64, 64) patch or a (B, 3, 64, 64) batch.

    Returns (output, tape); the tape is None unless record is set. Output
    values are unclamped reals; clamping happens at image-write time.
    """
    x = np.asarray(patch, dtype=DTYPE)
    size = x.shape[-1]
    divisor = 2 ** model.depth
    expected_ch = model.conv_layers[0].in_channels
    if (x.ndim not in (3, 4) or x.shape[-3] != expected_ch
            or x.shape[-2] != size or size % divisor or size < divisor):
        raise ShapeMismatchError(
            f"expected ({expected_ch}, N, N) with N a multiple of {divisor}, "
            f"got shape {x.shape}")

    tape = ForwardTape(input=x) if record else None
    a = x
    conv_acts = []
    for p in model.conv_layers:
        a = ops.relu(ops.conv_forward(a, p))
        conv_acts.append(a)
    if record:
        tape.conv_acts = conv_acts

    n = model.depth
    for j, p in enumerate(model.deconv_layers):
        a = ops.deconv_forward(a, p)
        if j < n - 1:
            a = ops.skip_merge(a, conv_acts[n - 2 - j])
            if record:
                tape.merged.append(a)
    if record:
        tape.output = a
    return a, tape


def backward(model: EraserModel, tape: ForwardTape, d_output):
    """Backpropagate d_output through the taped forward pass.

    Gradients at each skip junction flow to both branches; the conv-side
    share is added to the main path when the conv layer is reached.
    Returns (conv_grads, deconv_grads) as lists of (d_weights, d_bias).
    """
    n = model.depth
    acts = tape.conv_acts
    # inputs to each deconv layer: conv_acts[-1], then the merged outputs
    deconv_inputs = [acts[-1]] + tape.merged

    g = np.asarray(d_output, dtype=DTYPE)
    skip_grads = [None] * n  # pending gradient for conv act i from its junction
    deconv_grads = [None] * n
    for j in range(n - 1, -1, -1):
        if j < n - 1:
            # through skip_merge: g arrives at merged[j]; gate on the stored
            # post-ReLU value (positive iff the pre-sum was positive)
            gate = np.where(tape.merged[j] > 0.0, g, 0.0)
            skip_grads[n - 2 - j] = gate
            g = gate
        bundle = ops.deconv_backward(deconv_inputs[j], model.deconv_layers[j], g)
        deconv_grads[j] = (bundle.d_weights, bundle.d_bias)
        g = bundle.d_input

    conv_grads = [None] * n
    for i in range(n - 1, -1, -1):
        if skip_grads[i] is not None:
            g = g + skip_grads[i]
        g = ops.relu_backward(acts[i], g)
        inp = acts[i - 1] if i > 0 else tape.input
        bundle = ops.conv_backward(inp, model.conv_layers[i], g)
        conv_grads[i] = (bundle.d_weights, bundle.d_bias)
        g = bundle.d_input
    return conv_grads, deconv_grads


def train_step(model: EraserModel, batch: TrainBatch, cfg: TrainConfig) -> float:
    """One SGD step over the batch; returns the pre-update loss."""
    inputs, targets = batch.stacked()
    out, tape = forward(model, inputs, record=True)
    loss, d_out = ops.mse_loss(out, targets)
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"loss is {loss!r}")
    conv_grads, deconv_grads = backward(model, tape, d_out)
    lr = cfg.learning_rate
    for p, (gw, gb) in zip(model.conv_layers, conv_grads):
        p.weights -= lr * gw
        p.bias -= lr * gb
    for p, (gw, gb) in zip(model.deconv_layers, deconv_grads):
        p.weights -= lr * gw
        p.bias -= lr * gb
    return loss


def save_model(model: EraserModel, path) -> None:
    """Write weights: magic, layer count, then per layer the shape header
    (out, in, kh, kw as uint32 LE) followed by float32 LE weights and biases.
    """
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        layers = model.parameters()
        f.write(struct.pack("<I", len(layers)))
        for p in layers:
            out_ch, in_ch, kh, kw = p.weights.shape
            f.write(struct.pack("<IIII", out_ch, in_ch, kh, kw))
            f.write(p.weights.astype("<f4").tobytes())
            f.write(p.bias.astype("<f4").tobytes())


def load_model(path, plan=DEFAULT_PLAN) -> EraserModel:
    """Read a weight file and validate it against the fixed architecture."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != WEIGHT_MAGIC:
        raise WeightFormatError(
            f"bad magic {data[:8]!r}, expected {WEIGHT_MAGIC!r}")
    if len(data) < 12:
        raise WeightFormatError("truncated file: missing layer count")
    (count,) = struct.unpack_from("<I", data, 8)
    n = len(plan) - 1
    if count != 2 * n:
        raise WeightFormatError(
            f"file holds {count} layers, architecture has {2 * n}")

    expected = [(plan[i + 1], plan[i]) for i in range(n)]
    expected += [(plan[i - 1], plan[i]) for i in range(n, 0, -1)]

    offset = 12
    layers = []
    for idx, (exp_out, exp_in) in enumerate(expected):
        if offset + 16 > len(data):
            raise WeightFormatError(f"truncated file in layer {idx} header")
        out_ch, in_ch, kh, kw = struct.unpack_from("<IIII", data, offset)
        offset += 16
        if (out_ch, in_ch, kh, kw) != (exp_out, exp_in, KERNEL, KERNEL):
            raise WeightFormatError(
                f"layer {idx} is {out_ch}x{in_ch}x{kh}x{kw}, expected "
                f"{exp_out}x{exp_in}x{KERNEL}x{KERNEL}")
        nw = out_ch * in_ch * kh * kw
        nb_ = out_ch
        need = 4 * (nw + nb_)
        if offset + need > len(data):
            raise WeightFormatError(f"truncated file in layer {idx} data")
        w = np.frombuffer(data, dtype="<f4", count=nw, offset=offset)
        offset += 4 * nw
        b = np.frombuffer(data, dtype="<f4", count=nb_, offset=offset)
        offset += 4 * nb_
        layers.append(ConvParams(
            w.astype(DTYPE).reshape(out_ch, in_ch, kh, kw), b.astype(DTYPE)))
    if offset != len(data):
        raise WeightFormatError(
            f"{len(data) - offset} trailing bytes after layer {2 * n - 1}")
    return EraserModel(layers[:n], layers[n:])
