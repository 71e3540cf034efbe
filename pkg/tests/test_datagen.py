"""Data-factory oracles: dilation growth, harmonic fill, patch slicing."""

import numpy as np
import pytest
import scipy.ndimage as ndi

from texteraser import datagen
from texteraser.datagen import (PatchPair, SynthConfig, balanced_sample,
                                build_corpus, dilate, extract_patch_pairs,
                                inpaint, load_training_pairs, make_target,
                                read_manifest, render_synthetic_scene)
from texteraser.tensor import ShapeMismatchError


# ---------------------------------------------------------------------------
# dilation

def test_single_pixel_grows_to_3x3():
    mask = np.zeros((9, 9), dtype=bool)
    mask[4, 4] = True
    grown = dilate(mask, 1)
    expected = np.zeros_like(mask)
    expected[3:6, 3:6] = True
    np.testing.assert_array_equal(grown, expected)


def test_single_pixel_grows_to_7x7_after_three():
    mask = np.zeros((11, 11), dtype=bool)
    mask[5, 5] = True
    grown = dilate(mask, 3)
    expected = np.zeros_like(mask)
    expected[2:9, 2:9] = True
    np.testing.assert_array_equal(grown, expected)


def test_zero_iterations_is_identity():
    rng = np.random.default_rng(0)
    mask = rng.uniform(size=(12, 8)) < 0.3
    out = dilate(mask, 0)
    np.testing.assert_array_equal(out, mask)
    assert out is not mask  # caller owns a copy


def test_dilate_matches_scipy_reference():
    rng = np.random.default_rng(1)
    se = np.ones((3, 3), dtype=bool)
    for _ in range(5):
        mask = rng.uniform(size=(15, 21)) < 0.15
        for k in (1, 2, 3):
            np.testing.assert_array_equal(
                dilate(mask, k), ndi.binary_dilation(mask, se, iterations=k))


def test_dilate_clips_at_borders():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = True
    grown = dilate(mask, 1)
    expected = np.zeros_like(mask)
    expected[:2, :2] = True
    np.testing.assert_array_equal(grown, expected)


def test_dilate_is_monotone():
    rng = np.random.default_rng(2)
    mask = rng.uniform(size=(10, 10)) < 0.2
    grown = dilate(mask, 1)
    assert (grown | mask).sum() == grown.sum()


def test_dilate_rejects_negative_iterations():
    with pytest.raises(ValueError):
        dilate(np.zeros((2, 2), dtype=bool), -1)


# ---------------------------------------------------------------------------
# inpainting

def test_inpaint_leaves_unmasked_bit_identical():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
    mask = np.zeros((20, 20), dtype=bool)
    mask[5:9, 7:12] = True
    out = inpaint(img, mask)
    np.testing.assert_array_equal(out[~mask], img[~mask])


def test_inpaint_single_pixel_converges_to_neighbor_mean():
    img = np.zeros((3, 3, 3), dtype=np.uint8)
    img[0, 1] = 10
    img[2, 1] = 20
    img[1, 0] = 30
    img[1, 2] = 40
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True
    out = inpaint(img, mask)
    assert abs(int(out[1, 1, 0]) - 25) <= 1


def test_inpaint_maximum_principle():
    # filled values stay within the surrounding value range (+-1 for rounding)
    rng = np.random.default_rng(4)
    img = rng.integers(60, 201, size=(16, 16, 3), dtype=np.uint8)
    mask = np.zeros((16, 16), dtype=bool)
    mask[4:12, 4:12] = True
    out = inpaint(img, mask)
    assert out[mask].min() >= img[~mask].min() - 1
    assert out[mask].max() <= img[~mask].max() + 1


def test_inpaint_uniform_region_is_exact():
    img = np.full((10, 10, 3), 77, dtype=np.uint8)
    mask = np.zeros((10, 10), dtype=bool)
    mask[2:8, 2:8] = True
    np.testing.assert_array_equal(inpaint(img, mask), img)


def test_inpaint_empty_mask_returns_copy():
    img = np.arange(27, dtype=np.uint8).reshape(3, 3, 3)
    out = inpaint(img, np.zeros((3, 3), dtype=bool))
    np.testing.assert_array_equal(out, img)
    assert out is not img


def test_inpaint_rejects_full_mask():
    with pytest.raises(ValueError):
        inpaint(np.zeros((4, 4, 3), dtype=np.uint8),
                np.ones((4, 4), dtype=bool))


def test_inpaint_rejects_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        inpaint(np.zeros((4, 4, 3), dtype=np.uint8),
                np.zeros((5, 4), dtype=bool))


def test_make_target_erases_stroke_contrast():
    cfg = SynthConfig(seed=11, size=96, background="flat")
    image, mask = render_synthetic_scene(cfg)
    target = make_target(image, mask, 1)
    # flat background: the fill must reproduce it exactly under the strokes
    bg = np.argwhere(~dilate(mask, 1))
    y, x = bg[0]
    np.testing.assert_array_equal(
        target[mask], np.broadcast_to(image[y, x], (mask.sum(), 3)))


# ---------------------------------------------------------------------------
# scene rendering

def test_render_is_seed_deterministic():
    cfg = SynthConfig(seed=5, size=96)
    a_img, a_mask = render_synthetic_scene(cfg)
    b_img, b_mask = render_synthetic_scene(cfg)
    np.testing.assert_array_equal(a_img, b_img)
    np.testing.assert_array_equal(a_mask, b_mask)


def test_render_seed_changes_content():
    a_img, _ = render_synthetic_scene(SynthConfig(seed=0, size=96))
    b_img, _ = render_synthetic_scene(SynthConfig(seed=1, size=96))
    assert not np.array_equal(a_img, b_img)


def test_render_mask_marks_exactly_foreground_pixels():
    for seed in range(6):
        cfg = SynthConfig(seed=seed, size=96)
        image, mask = render_synthetic_scene(cfg)
        if not mask.any():
            continue
        fg_colors = image[mask]
        # all stroke pixels share one color
        assert (fg_colors == fg_colors[0]).all()


def test_render_produces_some_text():
    cfg = SynthConfig(seed=12, size=128)
    _, mask = render_synthetic_scene(cfg)
    assert 0 < mask.sum() < mask.size


@pytest.mark.parametrize("kind", ["flat", "gradient", "checker", "noise"])
def test_render_supports_each_background(kind):
    image, _ = render_synthetic_scene(
        SynthConfig(seed=3, size=64, background=kind))
    assert image.shape == (64, 64, 3)
    assert image.dtype == np.uint8


def test_synth_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(size=32)
    with pytest.raises(ValueError):
        SynthConfig(glyph_count=(5, 2))
    with pytest.raises(ValueError):
        SynthConfig(background="plasma")


# ---------------------------------------------------------------------------
# patch extraction and sampling

def test_extract_counts_and_origins():
    rng = np.random.default_rng(6)
    img = rng.integers(0, 256, size=(128, 96, 3), dtype=np.uint8)
    mask = np.zeros((128, 96), dtype=bool)
    pairs = extract_patch_pairs(img, img.copy(), mask, image_id="t")
    # x in {0, 32}, y in {0, 32, 64} -> 6 windows
    assert len(pairs) == 6
    assert {p.origin for p in pairs} == {("t", x, y)
                                         for x in (0, 32) for y in (0, 32, 64)}
    assert all(p.input.shape == (3, 64, 64) for p in pairs)


def test_extract_labels_follow_mask():
    img = np.zeros((96, 96, 3), dtype=np.uint8)
    mask = np.zeros((96, 96), dtype=bool)
    mask[80, 80] = True  # only windows touching the bottom-right corner
    pairs = extract_patch_pairs(img, img.copy(), mask)
    labels = {p.origin[1:]: p.positive for p in pairs}
    assert labels[(32, 32)] is True
    assert labels[(0, 0)] is False


def test_extract_tensors_align_with_images():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    tgt = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    (pair,) = extract_patch_pairs(img, tgt, np.zeros((64, 64), dtype=bool))
    np.testing.assert_allclose(pair.input * 255.0,
                               img.transpose(2, 0, 1).astype(float))
    np.testing.assert_allclose(pair.target * 255.0,
                               tgt.transpose(2, 0, 1).astype(float))


def test_extract_rejects_too_small():
    with pytest.raises(ShapeMismatchError):
        extract_patch_pairs(np.zeros((32, 64, 3), dtype=np.uint8),
                            np.zeros((32, 64, 3), dtype=np.uint8),
                            np.zeros((32, 64), dtype=bool))


def _dummy_pairs(n_pos, n_neg):
    mk = lambda flag, i: PatchPair(np.full((3, 1, 1), i, dtype=float),
                                   np.zeros((3, 1, 1)), flag, ("", i, 0))
    return ([mk(True, i) for i in range(n_pos)]
            + [mk(False, 100 + i) for i in range(n_neg)])


def test_balanced_sample_is_one_to_one():
    sample = balanced_sample(_dummy_pairs(4, 20), seed=0)
    assert sum(p.positive for p in sample) == 4
    assert sum(not p.positive for p in sample) == 4


def test_balanced_sample_keeps_all_when_negatives_scarce():
    sample = balanced_sample(_dummy_pairs(10, 3), seed=0)
    assert sum(p.positive for p in sample) == 10
    assert sum(not p.positive for p in sample) == 3


def test_balanced_sample_seed_deterministic():
    pairs = _dummy_pairs(5, 30)
    a = balanced_sample(pairs, seed=9)
    b = balanced_sample(pairs, seed=9)
    assert [p.origin for p in a] == [p.origin for p in b]


# ---------------------------------------------------------------------------
# corpus round trip

def test_build_corpus_layout(tmp_path):
    out = tmp_path / "corpus"
    manifest = build_corpus(out, 3, SynthConfig(seed=2, size=96))
    records = read_manifest(out)
    assert len(records) == 9  # 3 scenes x 3 dilation variants
    ks = sorted(k for *_, k in records)
    assert ks == [0, 0, 0, 1, 1, 1, 3, 3, 3]
    assert manifest.endswith("manifest.tsv")


def test_build_corpus_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    build_corpus(a, 2, SynthConfig(seed=8, size=96))
    build_corpus(b, 2, SynthConfig(seed=8, size=96))
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_load_training_pairs_filters_by_k(tmp_path):
    out = tmp_path / "corpus"
    build_corpus(out, 2, SynthConfig(seed=4, size=96))
    pairs = load_training_pairs(out, 3, seed=0)
    assert pairs
    assert all(p.input.shape == (3, 64, 64) for p in pairs)


def test_scene_seed_is_stable():
    assert datagen.scene_seed(1, 2) == datagen.scene_seed(1, 2)
    assert datagen.scene_seed(1, 2) != datagen.scene_seed(1, 3)
