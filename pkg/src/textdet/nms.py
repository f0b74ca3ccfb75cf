"""Locality-aware NMS: single-pass row-order merging of overlapping
candidates by score-weighted averaging, followed by a standard greedy NMS.

Merged scores accumulate (sum of the merged pair), so the final greedy
pass ranks clusters by how many high-confidence cells voted for them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveScore
from .geometry import Detection, quad_iou


@dataclass(frozen=True)
class MergeConfig:
    merge_iou_threshold: float = 0.3
    final_nms_iou_threshold: float = 0.2
    counters_enabled: bool = True

    def __post_init__(self):
        for t in (self.merge_iou_threshold, self.final_nms_iou_threshold):
            if not 0.0 < t < 1.0:
                raise ValueError("IoU thresholds must be in (0, 1)")


@dataclass
class MergeStats:
    weighted_merge_calls: int = 0
    pairwise_iou_evaluations: int = 0


def weighted_merge(g: Detection, p: Detection) -> Detection:
    """Score-weighted mean of two quads; the merged score is the sum."""
    if g.score <= 0.0 or p.score <= 0.0:
        raise NonPositiveScore("weighted merge requires positive scores")
    total = g.score + p.score
    quad = (g.score * g.quad + p.score * p.quad) / total
    return Detection(quad=quad, score=total)


def should_merge(g: Detection, p: Detection, cfg: MergeConfig = MergeConfig()) -> bool:
    """Merge predicate: quad IoU at or above the merge threshold."""
    return quad_iou(g.quad, p.quad) >= cfg.merge_iou_threshold


def standard_nms(
    dets: list[Detection],
    iou_threshold: float = 0.2,
    stats: MergeStats | None = None,
) -> list[Detection]:
    """Greedy score-descending suppression (ties broken by input index)."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[Detection] = []
    for i in order:
        d = dets[i]
        suppressed = False
        for k in kept:
            if stats is not None:
                stats.pairwise_iou_evaluations += 1
            if quad_iou(d.quad, k.quad) >= iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(d)
    return kept


def locality_aware_nms(
    dets: list[Detection], cfg: MergeConfig = MergeConfig()
) -> tuple[list[Detection], MergeStats]:
    """Row-order single-pass merging, then standard NMS on the survivors.

    Input must be in row-first (decoder) order; each candidate either
    merges into the running candidate or flushes it and takes its place.
    """
    stats = MergeStats()
    merged: list[Detection] = []
    p: Detection | None = None
    for g in dets:
        if p is not None:
            stats.pairwise_iou_evaluations += 1
            if should_merge(g, p, cfg):
                p = weighted_merge(g, p)
                stats.weighted_merge_calls += 1
                continue
            merged.append(p)
        p = g
    if p is not None:
        merged.append(p)
    return standard_nms(merged, cfg.final_nms_iou_threshold, stats), stats
