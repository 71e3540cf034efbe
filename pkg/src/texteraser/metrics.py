"""Erasure quality metrics.

Detection-side: greedy one-to-one IoU matching of predicted boxes against
ground truth, reported as precision/recall/f-score. Pixel-side: mean
absolute errors that need no detector, split by mask membership.

Box coordinates are half-open integer pixel ranges, so area is
(x_max - x_min) * (y_max - y_min).
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .tensor import ShapeMismatchError

IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class DetectionBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int
    score: float = 1.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate box ({self.x_min},{self.y_min},"
                f"{self.x_max},{self.y_max})")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class MetricsReport:
    recall: float
    precision: float
    f_score: float
    matched: int
    total_detections: int
    total_ground_truth: int


@dataclass(frozen=True)
class PixelErasureReport:
    masked_mae_vs_target: float
    masked_mae_untouched: float
    unmasked_mae: float
    empty_mask: bool = False


def iou(a: DetectionBox, b: DetectionBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def match_detections(dets, gts, thresh: float = IOU_THRESHOLD):
    """Greedy one-to-one matching by descending IoU.

    Returns (det_index, gt_index) pairs; every index appears at most once.
    Ties break on lower det index, then lower gt index, so the result is
    deterministic.
    """
    candidates = []
    for di, det in enumerate(dets):
        for gi, gt in enumerate(gts):
            overlap = iou(det, gt)
            if overlap >= thresh:
                candidates.append((-overlap, di, gi))
    candidates.sort()
    used_d, used_g, pairs = set(), set(), []
    for _, di, gi in candidates:
        if di in used_d or gi in used_g:
            continue
        used_d.add(di)
        used_g.add(gi)
        pairs.append((di, gi))
    return pairs


def prf(matching, total_dets: int, total_gts: int) -> MetricsReport:
    """Precision/recall/f-score from a matching (or a matched count)."""
    matched = matching if isinstance(matching, int) else len(matching)
    if matched > min(total_dets, total_gts):
        raise ValueError(
            f"{matched} matches exceed {total_dets} dets / {total_gts} gts")
    precision = matched / total_dets if total_dets else 0.0
    recall = matched / total_gts if total_gts else 0.0
    f_score = (2 * precision * recall / (precision + recall)
               if precision + recall else 0.0)
    return MetricsReport(recall=recall, precision=precision, f_score=f_score,
                         matched=matched, total_detections=total_dets,
                         total_ground_truth=total_gts)


def evaluate_boxes(dets, gts, thresh: float = IOU_THRESHOLD) -> MetricsReport:
    return prf(match_detections(dets, gts, thresh), len(dets), len(gts))


def pixel_erasure_report(original, erased, target, mask) -> PixelErasureReport:
    """Mask-restricted mean absolute errors on the 0..255 scale.

    masked_mae_vs_target: erased vs target inside the mask (lower is a
    better erase). masked_mae_untouched: original vs target inside the
    mask (the do-nothing baseline). unmasked_mae: erased vs original
    outside the mask (collateral damage).
    """
    original = np.asarray(original)
    erased = np.asarray(erased)
    target = np.asarray(target)
    mask = np.asarray(mask, dtype=bool)
    for name, img in (("erased", erased), ("target", target)):
        if img.shape != original.shape:
            raise ShapeMismatchError(
                f"{name} {img.shape} vs original {original.shape}")
    if mask.shape != original.shape[:2]:
        raise ShapeMismatchError(
            f"mask {mask.shape} vs image {original.shape[:2]}")

    def mae(a, b, where):
        return float(np.abs(a.astype(np.float64) -
                            b.astype(np.float64))[where].mean())

    empty = not mask.any()
    return PixelErasureReport(
        masked_mae_vs_target=0.0 if empty else mae(erased, target, mask),
        masked_mae_untouched=0.0 if empty else mae(original, target, mask),
        unmasked_mae=0.0 if mask.all() else mae(erased, original, ~mask),
        empty_mask=empty)


# ---------------------------------------------------------------------------
# box files and report rendering

def read_boxes(path):
    """Parse one box per line: "x_min,y_min,x_max,y_max[,score]"."""
    boxes = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) not in (4, 5):
                raise ValueError(
                    f"{path}:{lineno}: expected 4 or 5 comma-separated "
                    f"fields, got {len(parts)}")
            try:
                coords = [int(p) for p in parts[:4]]
                score = float(parts[4]) if len(parts) == 5 else 1.0
                boxes.append(DetectionBox(*coords, score=score))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return boxes


def write_boxes(boxes, path):
    with open(path, "w", encoding="utf-8") as f:
        for b in boxes:
            f.write(f"{b.x_min},{b.y_min},{b.x_max},{b.y_max},{b.score}\n")


def format_report(report) -> str:
    """key<TAB>value lines followed by a one-line JSON record."""
    fields = asdict(report)
    lines = [f"{key}\t{value}" for key, value in fields.items()]
    lines.append(json.dumps(fields, separators=(",", ":")))
    return "\n".join(lines)
