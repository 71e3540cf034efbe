"""Command-line surface: gen-data, train, erase, eval, gradcheck.

Option precedence is flags > config file > defaults. Every run echoes its
resolved configuration as "config<TAB>key=value" lines and, where an
output location exists, writes run_config.txt with plain "key=value"
lines (itself loadable via --config to replay the run).

Exit codes: 0 success, 2 configuration errors, 3 IO/format errors,
4 numeric failures.
"""

import argparse
import os
import sys

import numpy as np

from . import datagen, metrics, pipeline
from .gradcheck import TOLERANCE, full_suite
from .model import (NonFiniteLossError, TrainBatch, TrainConfig,
                    WeightFormatError, init_model, load_model, save_model,
                    train_step)
from .netpbm import CodecError, read_image, read_mask, write_image
from .tensor import ShapeMismatchError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

WEIGHTS_NAME = "weights.txe"
LOG_NAME = "train_log.tsv"
MANIFEST_NAME = "run_config.txt"

_REQUIRED = object()


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _positive(name):
    def check(value):
        if value < 1:
            raise CliError(f"{name} must be >= 1, got {value}", EXIT_CONFIG)
    return check


def _nonneg(name):
    def check(value):
        if value < 0:
            raise CliError(f"{name} must be >= 0, got {value}", EXIT_CONFIG)
    return check


def _choice(name, allowed):
    def check(value):
        if value not in allowed:
            raise CliError(
                f"{name} must be one of {allowed}, got {value!r}", EXIT_CONFIG)
    return check


# (key, type, default, validator); key "x-y" maps to flag --x-y / attr x_y
OPTIONS = {
    "gen-data": (
        ("seed", int, 0, None),
        ("out", str, _REQUIRED, None),
        ("scenes", int, 20, _positive("scenes")),
        ("size", int, 128, None),
    ),
    "train": (
        ("seed", int, 0, None),
        ("corpus", str, _REQUIRED, None),
        ("out", str, _REQUIRED, None),
        ("steps", int, 1000, _positive("steps")),
        ("lr", float, 1e-4, _nonneg("lr")),
        ("batch", int, 16, _positive("batch")),
        ("dilate-k", int, 3, _choice("dilate-k", (0, 1, 3))),
        ("log-every", int, 50, _positive("log-every")),
    ),
    "erase": (
        ("weights", str, _REQUIRED, None),
        ("input", str, _REQUIRED, None),
        ("output", str, _REQUIRED, None),
    ),
    "eval": (
        ("mode", str, "boxes", _choice("mode", ("boxes", "pixels"))),
        ("dets", str, None, None),
        ("gts", str, None, None),
        ("original", str, None, None),
        ("erased", str, None, None),
        ("target", str, None, None),
        ("mask", str, None, None),
        ("out", str, None, None),
    ),
    "gradcheck": (
        ("seed", int, 0, None),
    ),
}


def load_config_file(path):
    """Parse a line-based key=value file; '#' starts a comment."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}", EXIT_IO) from None
    entries = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(
                f"{path}:{lineno}: expected key=value, got {line!r}",
                EXIT_CONFIG)
        key, value = line.split("=", 1)
        entries[key.strip().replace("_", "-")] = value.strip()
    return entries


def resolve(command, ns):
    """Merge flags over config-file entries over defaults."""
    table = OPTIONS[command]
    file_cfg = load_config_file(ns.config) if ns.config else {}
    known = {key for key, *_ in table}
    unknown = sorted(set(file_cfg) - known)
    if unknown:
        raise CliError(
            f"unknown config key(s) for {command}: {', '.join(unknown)}",
            EXIT_CONFIG)
    resolved = {}
    for key, typ, default, validator in table:
        value = getattr(ns, key.replace("-", "_"))
        if value is None and key in file_cfg:
            try:
                value = typ(file_cfg[key])
            except ValueError:
                raise CliError(
                    f"config key {key}: cannot parse {file_cfg[key]!r} "
                    f"as {typ.__name__}", EXIT_CONFIG) from None
        if value is None:
            if default is _REQUIRED:
                raise CliError(f"missing required option --{key}", EXIT_CONFIG)
            value = default
        if validator is not None and value is not None:
            validator(value)
        resolved[key] = value
    return resolved


def echo_config(command, cfg, out_dir=None):
    for key, value in cfg.items():
        print(f"config\t{key}={value}")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, MANIFEST_NAME), "w",
                  encoding="utf-8") as f:
            f.write(f"# {command}\n")
            for key, value in cfg.items():
                if value is not None:
                    f.write(f"{key}={value}\n")


def cmd_gen_data(cfg):
    echo_config("gen-data", cfg, cfg["out"])
    manifest = datagen.build_corpus(
        cfg["out"], cfg["scenes"],
        datagen.SynthConfig(seed=cfg["seed"], size=cfg["size"]))
    print(f"manifest\t{manifest}")
    return EXIT_OK


def cmd_train(cfg):
    echo_config("train", cfg, cfg["out"])
    pairs = datagen.load_training_pairs(
        cfg["corpus"], cfg["dilate-k"], cfg["seed"])
    if not pairs:
        raise CliError(
            f"corpus {cfg['corpus']} yields no patch pairs for "
            f"dilate-k={cfg['dilate-k']}", EXIT_CONFIG)
    model = init_model(cfg["seed"])
    train_cfg = TrainConfig(learning_rate=cfg["lr"], batch_size=cfg["batch"],
                            max_steps=cfg["steps"], seed=cfg["seed"],
                            log_every=cfg["log-every"])
    rng = np.random.default_rng(cfg["seed"])
    log_path = os.path.join(cfg["out"], LOG_NAME)
    with open(log_path, "w", encoding="utf-8") as log:
        for step in range(1, train_cfg.max_steps + 1):
            if len(pairs) <= train_cfg.batch_size:
                chosen = pairs
            else:
                idx = rng.choice(len(pairs), size=train_cfg.batch_size,
                                 replace=False)
                chosen = [pairs[i] for i in idx]
            batch = TrainBatch(inputs=[p.input for p in chosen],
                               targets=[p.target for p in chosen])
            try:
                loss = train_step(model, batch, train_cfg)
            except NonFiniteLossError as exc:
                raise CliError(f"step {step}: {exc}", EXIT_NUMERIC) from None
            if (step == 1 or step % train_cfg.log_every == 0
                    or step == train_cfg.max_steps):
                line = f"{step}\t{loss:.10g}"
                print(line)
                log.write(line + "\n")
    weights_path = os.path.join(cfg["out"], WEIGHTS_NAME)
    save_model(model, weights_path)
    print(f"saved\t{weights_path}")
    return EXIT_OK


def cmd_erase(cfg):
    echo_config("erase", cfg)
    model = load_model(cfg["weights"])
    image = read_image(cfg["input"])
    write_image(pipeline.erase_image(image, model), cfg["output"])
    print(f"wrote\t{cfg['output']}")
    return EXIT_OK


def _eval_boxes(cfg):
    dets_dir, gts_dir = cfg["dets"], cfg["gts"]
    if not dets_dir or not gts_dir:
        raise CliError("mode=boxes needs --dets and --gts directories",
                       EXIT_CONFIG)
    det_names = set(os.listdir(dets_dir))
    gt_names = set(os.listdir(gts_dir))
    shared = sorted(det_names & gt_names)
    skipped = sorted(det_names ^ gt_names)
    lines = []
    matched = dets_total = gts_total = 0
    for name in shared:
        dets = metrics.read_boxes(os.path.join(dets_dir, name))
        gts = metrics.read_boxes(os.path.join(gts_dir, name))
        report = metrics.evaluate_boxes(dets, gts)
        matched += report.matched
        dets_total += report.total_detections
        gts_total += report.total_ground_truth
        lines.append(f"# {name}")
        lines.append(metrics.format_report(report))
    for name in skipped:
        where = "dets" if name in det_names else "gts"
        print(f"warning: {name} present only under {where}; skipped",
              file=sys.stderr)
    lines.append("# micro-average")
    lines.append(metrics.format_report(
        metrics.prf(matched, dets_total, gts_total)))
    lines.append(f"warnings\t{len(skipped)}")
    return "\n".join(lines)


def _eval_pixels(cfg):
    needed = ("original", "erased", "target", "mask")
    missing = [k for k in needed if not cfg[k]]
    if missing:
        raise CliError(
            "mode=pixels needs --" + ", --".join(missing), EXIT_CONFIG)
    report = metrics.pixel_erasure_report(
        read_image(cfg["original"]), read_image(cfg["erased"]),
        read_image(cfg["target"]), read_mask(cfg["mask"]))
    return metrics.format_report(report)


def cmd_eval(cfg):
    echo_config("eval", cfg, cfg["out"])
    text = _eval_boxes(cfg) if cfg["mode"] == "boxes" else _eval_pixels(cfg)
    print(text)
    if cfg["out"]:
        with open(os.path.join(cfg["out"], "report.txt"), "w",
                  encoding="utf-8") as f:
            f.write(text + "\n")
    return EXIT_OK


def cmd_gradcheck(cfg):
    echo_config("gradcheck", cfg)
    worst = full_suite(cfg["seed"])
    ok = True
    for name, err in worst.items():
        print(f"{name}\t{err:.3e}")
        ok = ok and err < TOLERANCE
    print(f"gradcheck\t{'pass' if ok else 'fail'}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "erase": cmd_erase,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="texteraser",
        description="Patch-based scene-text erasing toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, table in OPTIONS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None,
                       help="key=value file; flags override it")
        for key, typ, _default, _validator in table:
            p.add_argument(f"--{key}", type=typ, default=None,
                           dest=key.replace("-", "_"))
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = resolve(ns.command, ns)
        return COMMANDS[ns.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CodecError, WeightFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NonFiniteLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ShapeMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
