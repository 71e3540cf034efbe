"""Training-material factory.

Renders synthetic scenes with exact stroke masks, grows masks by 3x3
dilation, builds text-removed targets by harmonic (diffusion) inpainting,
and slices aligned 64x64 patch pairs off image/target pairs. Everything is
deterministic for a fixed seed.
"""

import os
from dataclasses import dataclass, replace

import numpy as np

from .netpbm import image_to_tensor, read_image, read_mask, write_image, write_mask
from .tensor import DTYPE, ShapeMismatchError

INPAINT_TOL = 0.05
INPAINT_MAX_ITERS = 10_000

WINDOW = 64
STRIDE = 32

DILATE_VARIANTS = (0, 1, 3)

# 5x7 stroke bitmaps; '#' marks a foreground pixel.
FONT_5X7 = {
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "C": (".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "F": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "K": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "N": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": ("####.", "....#", "....#", ".###.", "....#", "....#", "####."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
}

BACKGROUND_KINDS = ("flat", "gradient", "checker", "noise")


@dataclass
class SynthConfig:
    seed: int = 0
    size: int = 128
    glyph_count: tuple = (2, 6)
    glyph_scale: tuple = (2, 4)
    background: str = "any"  # one of BACKGROUND_KINDS, or "any"
    bg_range: tuple = (0, 255)
    fg_range: tuple = (0, 255)
    fg_contrast: int = 96

    def __post_init__(self):
        if self.size < 64:
            raise ValueError(f"size must be >= 64, got {self.size}")
        for name in ("glyph_count", "glyph_scale", "bg_range", "fg_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range ({lo}, {hi}) is empty")
        if self.background not in BACKGROUND_KINDS + ("any",):
            raise ValueError(f"unknown background kind {self.background!r}")


@dataclass
class PatchPair:
    """Aligned 64x64 input/target tensors with a text/background label."""

    input: np.ndarray
    target: np.ndarray
    positive: bool
    origin: tuple  # (image id, x, y)


def dilate(mask: np.ndarray, iterations: int) -> np.ndarray:
    """Morphological dilation with the 3x3 all-ones structuring element."""
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    out = np.asarray(mask, dtype=bool).copy()
    h, w = out.shape
    for _ in range(iterations):
        p = np.pad(out, 1)
        acc = np.zeros_like(out)
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                acc |= p[dy:dy + h, dx:dx + w]
        out = acc
    return out


def inpaint(image: np.ndarray, mask: np.ndarray,
            tol: float = INPAINT_TOL, max_iters: int = INPAINT_MAX_ITERS) -> np.ndarray:
    """Harmonic fill: Jacobi-average the 4 neighbors until settled.

    Masked pixels start at the mean of the unmasked boundary values and
    iterate until the largest per-pixel change drops below tol (gray
    levels) or max_iters is hit. Unmasked pixels come back bit-identical.
    """
    image = np.asarray(image)
    mask = np.asarray(mask, dtype=bool)
    if image.shape[:2] != mask.shape:
        raise ShapeMismatchError(
            f"image {image.shape[:2]} vs mask {mask.shape}")
    if mask.all():
        raise ValueError("mask covers the entire image; no background to read")
    out = image.copy()
    if not mask.any():
        return out

    # iterate only on the mask bounding box (plus 1-pixel rim)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1 = max(rows[0] - 1, 0), min(rows[-1] + 2, mask.shape[0])
    c0, c1 = max(cols[0] - 1, 0), min(cols[-1] + 2, mask.shape[1])
    u = image[r0:r1, c0:c1].astype(DTYPE)
    m = mask[r0:r1, c0:c1]

    adjacent = np.zeros_like(m)
    adjacent[:-1] |= m[1:]
    adjacent[1:] |= m[:-1]
    adjacent[:, :-1] |= m[:, 1:]
    adjacent[:, 1:] |= m[:, :-1]
    boundary = adjacent & ~m
    u[m] = u[boundary].mean(axis=0)

    count = np.zeros(m.shape, dtype=DTYPE)
    count[1:] += 1.0
    count[:-1] += 1.0
    count[:, 1:] += 1.0
    count[:, :-1] += 1.0
    midx = np.where(m)
    mcount = count[midx][:, None]

    for _ in range(max_iters):
        s = np.zeros_like(u)
        s[1:] += u[:-1]
        s[:-1] += u[1:]
        s[:, 1:] += u[:, :-1]
        s[:, :-1] += u[:, 1:]
        new_vals = s[midx] / mcount
        delta = np.abs(new_vals - u[midx]).max()
        u[midx] = new_vals
        if delta < tol:
            break

    out[r0:r1, c0:c1][m] = np.clip(np.floor(u[m] + 0.5), 0, 255).astype(np.uint8)
    return out


def make_target(image: np.ndarray, mask: np.ndarray, dilate_k: int) -> np.ndarray:
    """Text-removed target: dilate the stroke mask k times, then inpaint."""
    return inpaint(image, dilate(mask, dilate_k))


def _smooth_noise(rng, height, width, cell=8, amplitude=14.0):
    """Bilinearly upsampled coarse noise grid (value noise)."""
    gh, gw = height // cell + 2, width // cell + 2
    grid = rng.uniform(-amplitude, amplitude, size=(gh, gw))
    ys = np.arange(height) / cell
    xs = np.arange(width) / cell
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = xs - x0
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x0 + 1] * fx
    bot = grid[y0 + 1][:, x0] * (1 - fx) + grid[y0 + 1][:, x0 + 1] * fx
    return top * (1 - fy) + bot * fy


def _draw_background(rng, kind, size, lo, hi):
    span = (lo, hi + 1)
    if kind == "flat":
        color = rng.integers(*span, size=3)
        return np.full((size, size, 3), color, dtype=np.uint8)
    if kind == "gradient":
        c0 = rng.integers(*span, size=3).astype(DTYPE)
        c1 = rng.integers(*span, size=3).astype(DTYPE)
        t = np.linspace(0.0, 1.0, size)
        ramp = c0[None, :] + t[:, None] * (c1 - c0)[None, :]  # (size, 3)
        if rng.integers(2) == 0:
            img = np.repeat(ramp[:, None, :], size, axis=1)
        else:
            img = np.repeat(ramp[None, :, :], size, axis=0)
        return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    if kind == "checker":
        c0 = rng.integers(*span, size=3)
        c1 = rng.integers(*span, size=3)
        cell = int(rng.integers(12, 33))
        yy, xx = np.meshgrid(np.arange(size) // cell, np.arange(size) // cell,
                             indexing="ij")
        parity = ((yy + xx) % 2).astype(bool)
        img = np.where(parity[..., None], c1[None, None, :], c0[None, None, :])
        return img.astype(np.uint8)
    if kind == "noise":
        base = rng.integers(*span, size=3).astype(DTYPE)
        noise = _smooth_noise(rng, size, size)
        img = base[None, None, :] + noise[..., None]
        return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    raise ValueError(f"unknown background kind {kind!r}")


def _pick_foreground(rng, bg_mean, lo, hi, contrast):
    for _ in range(64):
        color = rng.integers(lo, hi + 1, size=3)
        if np.abs(color - bg_mean).max() >= contrast:
            return color.astype(np.uint8)
    return (255 - np.clip(bg_mean, 0, 255)).astype(np.uint8)


def render_synthetic_scene(cfg: SynthConfig):
    """Draw a background and glyph strokes; return (image, stroke mask).

    The mask marks exactly the pixels painted with the foreground color.
    """
    rng = np.random.default_rng(cfg.seed)
    size = cfg.size
    kind = cfg.background
    if kind == "any":
        kind = BACKGROUND_KINDS[rng.integers(len(BACKGROUND_KINDS))]
    image = _draw_background(rng, kind, size, *cfg.bg_range)
    mask = np.zeros((size, size), dtype=bool)

    fg = _pick_foreground(rng, image.mean(axis=(0, 1)),
                          *cfg.fg_range, cfg.fg_contrast)
    glyph_names = sorted(FONT_5X7)
    count = int(rng.integers(cfg.glyph_count[0], cfg.glyph_count[1] + 1))
    for _ in range(count):
        name = glyph_names[rng.integers(len(glyph_names))]
        scale = int(rng.integers(cfg.glyph_scale[0], cfg.glyph_scale[1] + 1))
        bits = np.array([[ch == "#" for ch in row] for row in FONT_5X7[name]])
        block = np.kron(bits, np.ones((scale, scale), dtype=bool))
        gh, gw = block.shape
        if gh >= size or gw >= size:
            continue
        y = int(rng.integers(0, size - gh + 1))
        x = int(rng.integers(0, size - gw + 1))
        image[y:y + gh, x:x + gw][block] = fg
        mask[y:y + gh, x:x + gw] |= block
    return image, mask


def extract_patch_pairs(image, target, mask, window: int = WINDOW,
                        stride: int = STRIDE, image_id: str = ""):
    """Slice aligned windows at stride-32 grid positions.

    A pair is positive when its window overlaps at least one mask pixel.
    The remainder strip of images not sized 64 + k*32 is dropped.
    """
    image = np.asarray(image)
    target = np.asarray(target)
    mask = np.asarray(mask, dtype=bool)
    if image.shape != target.shape or image.shape[:2] != mask.shape:
        raise ShapeMismatchError(
            f"image {image.shape}, target {target.shape}, mask {mask.shape} "
            "must share dimensions")
    h, w = mask.shape
    if h < window or w < window:
        raise ShapeMismatchError(
            f"image {w}x{h} is smaller than the {window}x{window} window")
    pairs = []
    for y in range(0, h - window + 1, stride):
        for x in range(0, w - window + 1, stride):
            win_mask = mask[y:y + window, x:x + window]
            pairs.append(PatchPair(
                input=image_to_tensor(image[y:y + window, x:x + window]),
                target=image_to_tensor(target[y:y + window, x:x + window]),
                positive=bool(win_mask.any()),
                origin=(image_id, x, y)))
    return pairs


def balanced_sample(pairs, seed: int):
    """All positives plus an equal-sized seeded subsample of negatives."""
    rng = np.random.default_rng(seed)
    positives = [p for p in pairs if p.positive]
    negatives = [p for p in pairs if not p.positive]
    k = min(len(positives), len(negatives))
    if k < len(negatives):
        keep = rng.choice(len(negatives), size=k, replace=False)
        negatives = [negatives[i] for i in sorted(keep)]
    sample = positives + negatives
    rng.shuffle(sample)
    return sample


# ---------------------------------------------------------------------------
# corpus on disk

MANIFEST_NAME = "manifest.tsv"


def scene_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def build_corpus(out_dir, scenes: int, cfg: SynthConfig,
                 dilate_ks=DILATE_VARIANTS):
    """Render a corpus and write the tab-separated manifest.

    Per scene: one PPM image, one PGM mask, and one inpainted target PPM
    per dilation variant; one manifest line per target.
    """
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for i in range(scenes):
        image, mask = render_synthetic_scene(
            replace(cfg, seed=scene_seed(cfg.seed, i)))
        stem = f"scene_{i:04d}"
        write_image(image, os.path.join(out_dir, f"{stem}.ppm"))
        write_mask(mask, os.path.join(out_dir, f"{stem}_mask.pgm"))
        for k in dilate_ks:
            target = make_target(image, mask, k)
            t_name = f"{stem}_target_k{k}.ppm"
            write_image(target, os.path.join(out_dir, t_name))
            lines.append(f"{stem}.ppm\t{stem}_mask.pgm\t{t_name}\t{k}")
    manifest = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    return manifest


def read_manifest(corpus_dir):
    """Parse manifest.tsv into (image_path, mask_path, target_path, k) rows."""
    path = os.path.join(corpus_dir, MANIFEST_NAME)
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, "
                    f"got {len(parts)}")
            records.append((os.path.join(corpus_dir, parts[0]),
                            os.path.join(corpus_dir, parts[1]),
                            os.path.join(corpus_dir, parts[2]),
                            int(parts[3])))
    return records


def load_training_pairs(corpus_dir, dilate_k: int, seed: int):
    """Read every manifest record for one dilation variant and return the
    balanced, shuffled patch-pair sample."""
    pairs = []
    for image_path, mask_path, target_path, k in read_manifest(corpus_dir):
        if k != dilate_k:
            continue
        image = read_image(image_path)
        mask = read_mask(mask_path)
        target = read_image(target_path)
        pairs.extend(extract_patch_pairs(
            image, target, mask, image_id=os.path.basename(image_path)))
    return balanced_sample(pairs, seed)
