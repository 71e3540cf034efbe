"""Detection matching, P/R/F arithmetic, and pixel-level erasure metrics."""

import json

import numpy as np
import pytest

from texteraser.metrics import (DetectionBox, MetricsReport,
                                PixelErasureReport, evaluate_boxes,
                                format_report, iou, match_detections,
                                pixel_erasure_report, prf, read_boxes,
                                write_boxes)
from texteraser.tensor import ShapeMismatchError


def box(x0, y0, x1, y1, score=1.0):
    return DetectionBox(x0, y0, x1, y1, score=score)


# ---------------------------------------------------------------------------
# IoU

def test_iou_identical_boxes():
    assert iou(box(2, 3, 10, 12), box(2, 3, 10, 12)) == 1.0


def test_iou_disjoint_boxes():
    assert iou(box(0, 0, 5, 5), box(5, 0, 10, 5)) == 0.0
    assert iou(box(0, 0, 5, 5), box(20, 20, 30, 30)) == 0.0


def test_iou_half_overlap_thirds():
    assert iou(box(0, 0, 10, 10), box(5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_iou_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x0, y0 = rng.integers(0, 50, 2)
        a = box(x0, y0, x0 + int(rng.integers(1, 30)),
                y0 + int(rng.integers(1, 30)))
        x0, y0 = rng.integers(0, 50, 2)
        b = box(x0, y0, x0 + int(rng.integers(1, 30)),
                y0 + int(rng.integers(1, 30)))
        ab, ba = iou(a, b), iou(b, a)
        assert ab == ba
        assert 0.0 <= ab <= 1.0


def test_box_invariants():
    with pytest.raises(ValueError):
        DetectionBox(5, 0, 5, 10)
    with pytest.raises(ValueError):
        DetectionBox(0, 0, 4, 4, score=1.5)


# ---------------------------------------------------------------------------
# matching

def test_match_identical_lists():
    boxes = [box(0, 0, 10, 10), box(20, 20, 30, 40)]
    pairs = match_detections(boxes, list(boxes))
    assert sorted(pairs) == [(0, 0), (1, 1)]


def test_match_empty_dets():
    assert match_detections([], [box(0, 0, 4, 4)]) == []


def test_match_greedy_prefers_higher_iou():
    gt = [box(0, 0, 10, 10)]
    dets = [box(0, 0, 10, 12),   # IoU 10/12
            box(0, 0, 10, 11)]   # IoU 10/11, higher
    pairs = match_detections(dets, gt)
    assert pairs == [(1, 0)]


def test_match_threshold_excludes_weak_overlap():
    pairs = match_detections([box(0, 0, 10, 10)], [box(6, 0, 16, 10)])
    assert pairs == []  # IoU 4/16 < 0.5


def test_match_is_injective_both_sides():
    rng = np.random.default_rng(1)
    dets, gts = [], []
    for _ in range(30):
        x0, y0 = rng.integers(0, 80, 2)
        dets.append(box(x0, y0, x0 + 10, y0 + 10))
        x0, y0 = rng.integers(0, 80, 2)
        gts.append(box(x0, y0, x0 + 10, y0 + 10))
    pairs = match_detections(dets, gts)
    assert len({d for d, _ in pairs}) == len(pairs)
    assert len({g for _, g in pairs}) == len(pairs)
    assert len(pairs) <= min(len(dets), len(gts))


def test_match_tie_breaks_deterministically():
    gt = [box(0, 0, 10, 10), box(100, 0, 110, 10)]
    dets = [box(0, 0, 10, 10), box(100, 0, 110, 10)]
    assert match_detections(dets, gt) == match_detections(dets, gt)


# ---------------------------------------------------------------------------
# precision / recall / f-score

def test_prf_benchmark_scale_rates():
    report = prf(8256, 9863, 10000)
    assert report.precision == pytest.approx(0.8371, abs=5e-5)
    assert report.recall == pytest.approx(0.8256, abs=5e-5)
    assert report.f_score == pytest.approx(2 * report.precision * report.recall
                                           / (report.precision + report.recall))


def test_prf_perfect():
    report = prf(5, 5, 5)
    assert (report.precision, report.recall, report.f_score) == (1.0, 1.0, 1.0)


def test_prf_zero_cases():
    report = prf(0, 0, 10)
    assert report.precision == 0.0
    assert report.recall == 0.0
    assert report.f_score == 0.0
    empty = prf(0, 0, 0)
    assert empty.f_score == 0.0


def test_prf_accepts_matching_list():
    report = prf([(0, 0), (1, 2)], 4, 3)
    assert report.matched == 2
    assert report.precision == 0.5
    assert report.recall == pytest.approx(2 / 3)


def test_prf_rejects_impossible_counts():
    with pytest.raises(ValueError):
        prf(5, 3, 10)


def test_prf_unmatched_detection_lowers_precision():
    base = prf(3, 4, 6)
    more = prf(3, 5, 6)
    assert more.precision < base.precision
    assert more.recall == base.recall


def test_evaluate_boxes_end_to_end():
    gts = [box(0, 0, 10, 10), box(50, 50, 60, 60)]
    report = evaluate_boxes(list(gts), gts)
    assert report.f_score == 1.0
    assert report.matched == 2


# ---------------------------------------------------------------------------
# pixel metrics

def _flat(h, w, value):
    return np.full((h, w, 3), value, dtype=np.uint8)


def test_pixel_report_zero_when_erased_equals_target():
    img = _flat(4, 4, 100)
    target = _flat(4, 4, 50)
    mask = np.zeros((4, 4), dtype=bool)
    mask[1, 1] = True
    rep = pixel_erasure_report(img, target.copy(), target, mask)
    assert rep.masked_mae_vs_target == 0.0
    assert rep.masked_mae_untouched == 50.0


def test_pixel_report_untouched_baseline_equality():
    img = _flat(4, 4, 90)
    target = _flat(4, 4, 30)
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = False
    rep = pixel_erasure_report(img, img.copy(), target, mask)
    assert rep.masked_mae_vs_target == rep.masked_mae_untouched


def test_pixel_report_hand_case_2x2():
    original = _flat(2, 2, 10)
    target = _flat(2, 2, 10)
    erased = target.copy()
    erased[0, 0] = (13, 10, 10)  # |diff| = (3, 0, 0) -> mean 1.0
    mask = np.zeros((2, 2), dtype=bool)
    mask[0, 0] = True
    rep = pixel_erasure_report(original, erased, target, mask)
    assert rep.masked_mae_vs_target == pytest.approx(1.0)
    assert rep.unmasked_mae == 0.0


def test_pixel_report_empty_mask_flagged():
    img = _flat(3, 3, 5)
    rep = pixel_erasure_report(img, img.copy(), img.copy(),
                               np.zeros((3, 3), dtype=bool))
    assert rep.empty_mask
    assert rep.masked_mae_vs_target == 0.0


def test_pixel_report_rejects_size_mismatch():
    with pytest.raises(ShapeMismatchError):
        pixel_erasure_report(_flat(3, 3, 0), _flat(3, 4, 0), _flat(3, 3, 0),
                             np.zeros((3, 3), dtype=bool))


# ---------------------------------------------------------------------------
# box files / report rendering

def test_box_file_round_trip(tmp_path):
    boxes = [box(1, 2, 3, 4), box(10, 20, 30, 40, score=0.25)]
    path = tmp_path / "boxes.txt"
    write_boxes(boxes, path)
    assert read_boxes(path) == boxes


def test_read_boxes_skips_blank_lines(tmp_path):
    path = tmp_path / "boxes.txt"
    path.write_text("\n1,2,3,4\n\n5,6,7,8,0.5\n\n", encoding="utf-8")
    assert len(read_boxes(path)) == 2


def test_read_boxes_reports_line_number(tmp_path):
    path = tmp_path / "boxes.txt"
    path.write_text("1,2,3,4\noops\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":2"):
        read_boxes(path)


def test_format_report_tab_layout_and_json_tail():
    report = MetricsReport(recall=0.5, precision=0.25, f_score=1 / 3,
                           matched=1, total_detections=4,
                           total_ground_truth=2)
    lines = format_report(report).splitlines()
    assert lines[0] == "recall\t0.5"
    assert lines[1] == "precision\t0.25"
    record = json.loads(lines[-1])
    assert record["matched"] == 1


def test_format_report_handles_pixel_reports():
    rep = PixelErasureReport(1.5, 3.0, 0.25, empty_mask=False)
    text = format_report(rep)
    assert "masked_mae_vs_target\t1.5" in text
    assert json.loads(text.splitlines()[-1])["unmasked_mae"] == 0.25
