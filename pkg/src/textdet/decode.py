"""Turn dense score/geometry maps into scored quad candidates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeDistance
from .geometry import Detection, is_convex, polygon_area, rbox_to_quad

RBOX = "rbox"
QUAD = "quad"


@dataclass
class DenseOutputs:
    """Score map plus geometry channels at one output stride.

    geometry has 5 channels for the rotated-box head (d1..d4, theta) or
    8 for the quad-offset head, matching the score map spatially.
    """

    score: np.ndarray  # (H, W) in [0, 1]
    geometry: np.ndarray  # (C, H, W)
    stride: int = 4
    head: str = RBOX

    def __post_init__(self):
        if self.geometry.shape[1:] != self.score.shape:
            raise ValueError("score/geometry spatial shapes differ")
        expected = 5 if self.head == RBOX else 8
        if self.geometry.shape[0] != expected:
            raise ValueError(
                f"{self.head} head expects {expected} geometry channels, "
                f"got {self.geometry.shape[0]}"
            )


@dataclass(frozen=True)
class DecodeConfig:
    score_threshold: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.score_threshold < 1.0:
            raise ValueError("score_threshold must be in (0, 1)")


@dataclass
class DecodeStats:
    emitted: int = 0
    skipped_malformed: int = 0


def decode(
    outputs: DenseOutputs,
    cfg: DecodeConfig = DecodeConfig(),
    stats: DecodeStats | None = None,
) -> list[Detection]:
    """Emit one Detection per qualifying cell, in row-major cell order.

    Cells whose geometry cannot form a valid convex quad (negative
    distances, degenerate or reflex reconstructions) are skipped and
    counted, not fatal.
    """
    score = np.asarray(outputs.score)
    ys, xs = np.nonzero(score >= cfg.score_threshold)
    dets: list[Detection] = []
    s = outputs.stride
    geo = outputs.geometry
    for y, x in zip(ys.tolist(), xs.tolist()):
        cx, cy = (x + 0.5) * s, (y + 0.5) * s
        try:
            if outputs.head == RBOX:
                quad = rbox_to_quad((cx, cy), geo[0:4, y, x], float(geo[4, y, x]))
            else:
                off = geo[:, y, x]
                quad = np.array(
                    [[cx + off[2 * i], cy + off[2 * i + 1]] for i in range(4)]
                )
            if polygon_area(quad) <= 0.0 or not is_convex(quad):
                raise NegativeDistance("degenerate reconstruction")
        except NegativeDistance:
            if stats is not None:
                stats.skipped_malformed += 1
            continue
        dets.append(Detection(quad=quad, score=float(score[y, x])))
    if stats is not None:
        stats.emitted += len(dets)
    return dets
