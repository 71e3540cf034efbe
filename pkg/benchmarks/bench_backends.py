"""Timing comparison of the compiled and numpy kernel backends.

Run as: python3 benchmarks/bench_backends.py [--repeats N]

Covers the four hot kernels at training shapes (batch 16, the 64x64
patch ladder) plus one full train step through the public model API.
"""

import argparse
import time

import numpy as np

from texteraser import kernels
from texteraser.model import TrainBatch, TrainConfig, init_model, train_step


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def layer_cases(rng):
    # (name, batch, in_ch, h, w, out_ch) mirroring the encoder ladder
    plan = [(3, 64, 32), (32, 32, 64), (64, 16, 128), (128, 8, 256)]
    for i, (ci, size, co) in enumerate(plan, 1):
        x = rng.standard_normal((16, ci, size, size))
        w = rng.standard_normal((co, ci, 4, 4))
        b = rng.standard_normal(co)
        gy = rng.standard_normal((16, co, size // 2, size // 2))
        yield f"conv{i} {ci}->{co} @{size}", x, w, b, gy


def run_backend(name, repeats):
    backend = kernels.get_backend(name)
    rng = np.random.default_rng(0)
    rows = []
    for label, x, w, b, gy in layer_cases(rng):
        fwd = best_of(lambda: backend.conv_fwd(x, w, b), repeats)
        bwd = best_of(lambda: backend.conv_bwd(x, w, gy), repeats)
        rows.append((label, fwd, bwd))
    # mirrored transposed-conv stage (256 -> 128 @ 4)
    x = rng.standard_normal((16, 256, 4, 4))
    w = rng.standard_normal((128, 256, 4, 4))
    b = rng.standard_normal(128)
    gy = rng.standard_normal((16, 128, 8, 8))
    rows.append(("deconv1 256->128 @4",
                 best_of(lambda: backend.deconv_fwd(x, w, b), repeats),
                 best_of(lambda: backend.deconv_bwd(x, w, gy), repeats)))
    return rows


def bench_train_step(backend_name, repeats):
    kernels.set_backend(backend_name)
    try:
        model = init_model(0)
        rng = np.random.default_rng(1)
        batch = TrainBatch(
            [rng.uniform(0, 1, (3, 64, 64)) for _ in range(16)],
            [rng.uniform(0, 1, (3, 64, 64)) for _ in range(16)])
        cfg = TrainConfig()
        return best_of(lambda: train_step(model, batch, cfg), repeats)
    finally:
        kernels.set_backend(None)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    names = ["numpy"]
    try:
        kernels.get_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        print("compiled extension unavailable; timing numpy only")

    per_backend = {name: run_backend(name, args.repeats) for name in names}
    print(f"{'kernel':28s}" + "".join(
        f"{name + ' fwd':>14s}{name + ' bwd':>14s}" for name in names))
    for i, (label, *_), in enumerate(per_backend[names[0]]):
        cells = ""
        for name in names:
            _, fwd, bwd = per_backend[name][i]
            cells += f"{fwd * 1e3:13.2f}m{bwd * 1e3:13.2f}m"
        print(f"{label:28s}{cells}")

    print()
    for name in names:
        t = bench_train_step(name, args.repeats)
        print(f"train step (batch 16), {name:7s}: {t * 1e3:8.1f} ms")
    if len(names) == 2:
        a = bench_train_step(names[0], args.repeats)
        b = bench_train_step(names[1], args.repeats)
        print(f"speedup {names[0]} vs {names[1]}: {b / a:.2f}x")


if __name__ == "__main__":
    main()
