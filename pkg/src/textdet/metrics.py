"""Precision / recall / F-score with greedy score-ordered one-to-one
matching at an IoU threshold (ICDAR-style, not ICDAR-exact)."""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Detection, polygon_area, quad_iou


@dataclass
class EvalResult:
    precision: float
    recall: float
    f_score: float
    matches: list[tuple[int, int, float]] = field(default_factory=list)


def evaluate(dets: list[Detection], gts, iou_threshold: float = 0.5) -> EvalResult:
    """Match detections (score-descending, ties by index) greedily to the
    unmatched ground truth of highest IoU.

    Empty-set convention: if both sides are empty every metric is 1; if
    only one side is empty its metric is 0.
    """
    if not dets and not gts:
        return EvalResult(1.0, 1.0, 1.0)
    matched_gt: set[int] = set()
    matches: list[tuple[int, int, float]] = []
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    for di in order:
        best_iou, best_gt = 0.0, -1
        for gi, gt in enumerate(gts):
            if gi in matched_gt:
                continue
            if polygon_area(dets[di].quad) <= 0.0:
                continue
            iou = quad_iou(dets[di].quad, gt)
            if iou > best_iou:
                best_iou, best_gt = iou, gi
        if best_gt >= 0 and best_iou >= iou_threshold:
            matched_gt.add(best_gt)
            matches.append((di, best_gt, best_iou))
    tp = len(matches)
    precision = tp / len(dets) if dets else 0.0
    recall = tp / len(gts) if gts else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalResult(precision, recall, f, matches)
