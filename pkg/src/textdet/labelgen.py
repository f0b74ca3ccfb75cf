"""Dense training targets from quad annotations: shrunk-quad score map and
rotated-box / quad-offset geometry maps at the output stride.

All geometry values are stored in input-image pixel units regardless of
stride.  A map cell covers stride x stride input pixels and is tested at
its center, (c + 0.5) * stride.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CollapsedQuad, OutOfBounds, ZeroArea
from .geometry import (
    as_quad,
    min_area_rect,
    polygon_area,
    quad_edge_lengths,
    rotation_matrix,
    signed_area,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelConfig:
    image_height: int
    image_width: int
    shrink_ratio: float = 0.3
    output_stride: int = 4

    def __post_init__(self):
        if not 0.0 <= self.shrink_ratio < 0.5:
            raise ValueError("shrink_ratio must be in [0, 0.5)")
        if self.output_stride not in (1, 2, 4):
            raise ValueError("output_stride must be one of 1, 2, 4")
        if self.image_height % self.output_stride or self.image_width % self.output_stride:
            raise ValueError("image dims must be divisible by the stride")

    @property
    def map_shape(self) -> tuple[int, int]:
        return (
            self.image_height // self.output_stride,
            self.image_width // self.output_stride,
        )


@dataclass
class RBoxTargetMaps:
    """Per-cell distances to the owning rotated rectangle plus its angle."""

    d: np.ndarray  # (4, H, W): top, right, bottom, left, input-pixel units
    theta: np.ndarray  # (H, W) radians
    valid_mask: np.ndarray  # (H, W) bool


@dataclass
class QuadTargetMaps:
    """Per-cell offsets to the owning quad's vertices."""

    offsets: np.ndarray  # (8, H, W): (dx1, dy1, ..., dx4, dy4)
    shortest_edge: np.ndarray  # (H, W) pixels
    valid_mask: np.ndarray  # (H, W) bool


def reference_lengths(q) -> np.ndarray:
    """Per-vertex shrink reference: min of the two incident edge lengths."""
    q = as_quad(q)
    edges = quad_edge_lengths(q)
    # edge i joins vertex i and vertex i+1, so vertex i touches edges i-1, i
    return np.minimum(edges, np.roll(edges, 1))


def shrink_quad(q, ratio: float) -> np.ndarray:
    """Move each edge's endpoints inward along it by ratio * r_i.

    The opposite-edge pair with the larger mean length is shrunk first
    (from original positions); the other pair is then shrunk along the
    already-moved edge directions.
    """
    q = as_quad(q)
    if not 0.0 <= ratio < 0.5:
        raise ValueError("ratio must be in [0, 0.5)")
    r = reference_lengths(q)
    edges = quad_edge_lengths(q)
    # pair A = edges (0, 2) i.e. <p1p2>, <p3p4>; pair B = edges (1, 3)
    pair_a_first = (edges[0] + edges[2]) >= (edges[1] + edges[3])
    out = q.copy()
    order = (0, 2, 1, 3) if pair_a_first else (1, 3, 0, 2)
    for e in order:
        i, j = e, (e + 1) % 4
        v = out[j] - out[i]
        n = np.linalg.norm(v)
        if n == 0.0:
            raise CollapsedQuad("shrink produced a zero-length edge")
        u = v / n
        out[i] = out[i] + ratio * r[i] * u
        out[j] = out[j] - ratio * r[j] * u
    if signed_area(out) <= 0.0:
        raise CollapsedQuad("shrunk quad has non-positive area")
    return out


def _check_in_bounds(quads, cfg: LabelConfig) -> None:
    for q in quads:
        q = np.asarray(q)
        if (
            q[:, 0].min() < 0
            or q[:, 1].min() < 0
            or q[:, 0].max() > cfg.image_width
            or q[:, 1].max() > cfg.image_height
        ):
            raise OutOfBounds(f"annotation vertex outside image: {q.tolist()}")


def cell_centers(cfg: LabelConfig) -> np.ndarray:
    """(H, W, 2) array of cell centers in input-image coordinates."""
    h, w = cfg.map_shape
    s = cfg.output_stride
    ys = (np.arange(h) + 0.5) * s
    xs = (np.arange(w) + 0.5) * s
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def _inside_mask(quad, centers) -> np.ndarray:
    """Point-in-convex-polygon test for every cell center at once."""
    q = np.asarray(quad, dtype=np.float64)
    if signed_area(q) < 0.0:
        q = q[::-1]
    inside = np.ones(centers.shape[:2], dtype=bool)
    for i in range(4):
        a, b = q[i], q[(i + 1) % 4]
        e = b - a
        cross = e[0] * (centers[..., 1] - a[1]) - e[1] * (centers[..., 0] - a[0])
        inside &= cross >= 0.0
    return inside


def _owner_map(quads, cfg: LabelConfig):
    """Assign each cell to the smallest-area annotation whose shrunk quad
    contains its center.  Returns (owner indices, -1 for background)."""
    _check_in_bounds(quads, cfg)
    centers = cell_centers(cfg)
    owner = np.full(cfg.map_shape, -1, dtype=np.int64)
    owner_area = np.full(cfg.map_shape, np.inf)
    for idx, q in enumerate(quads):
        q = as_quad(q)
        try:
            shrunk = shrink_quad(q, cfg.shrink_ratio)
        except CollapsedQuad:
            log.warning("annotation %d collapsed under shrinking; no positive cells", idx)
            continue
        area = polygon_area(q)
        mask = _inside_mask(shrunk, centers) & (area < owner_area)
        owner[mask] = idx
        owner_area[mask] = area
    return owner, centers


def generate_score_map(quads, cfg: LabelConfig) -> np.ndarray:
    """Binary (H, W) map: 1 where the cell center lies in a shrunk quad."""
    owner, _ = _owner_map(quads, cfg)
    return (owner >= 0).astype(np.float64)


def generate_rbox_maps(quads, cfg: LabelConfig) -> RBoxTargetMaps:
    """Distances to the owning min-area rectangle's edges, plus its angle."""
    owner, centers = _owner_map(quads, cfg)
    h, w = cfg.map_shape
    d = np.zeros((4, h, w))
    theta = np.zeros((h, w))
    valid = owner >= 0
    for idx, q in enumerate(quads):
        mask = owner == idx
        if not mask.any():
            continue
        rect = min_area_rect(as_quad(q))
        rot = rotation_matrix(-rect.theta)
        local = rect.quad @ rot.T
        x0, y0 = local[:, 0].min(), local[:, 1].min()
        x1, y1 = local[:, 0].max(), local[:, 1].max()
        c = centers[mask] @ rot.T
        d[0][mask] = c[:, 1] - y0  # top
        d[1][mask] = x1 - c[:, 0]  # right
        d[2][mask] = y1 - c[:, 1]  # bottom
        d[3][mask] = c[:, 0] - x0  # left
        theta[mask] = rect.theta
    if np.any(d[:, valid] <= 0.0):
        raise ZeroArea("positive cell outside its owning rectangle")
    return RBoxTargetMaps(d=d, theta=theta, valid_mask=valid)


def generate_quad_maps(quads, cfg: LabelConfig) -> QuadTargetMaps:
    """Vertex offsets (p_i - center) and shortest edge of the owning quad."""
    owner, centers = _owner_map(quads, cfg)
    h, w = cfg.map_shape
    offsets = np.zeros((8, h, w))
    shortest = np.zeros((h, w))
    valid = owner >= 0
    for idx, q in enumerate(quads):
        mask = owner == idx
        if not mask.any():
            continue
        q = as_quad(q)
        c = centers[mask]
        for i in range(4):
            offsets[2 * i][mask] = q[i, 0] - c[:, 0]
            offsets[2 * i + 1][mask] = q[i, 1] - c[:, 1]
        shortest[mask] = quad_edge_lengths(q).min()
    return QuadTargetMaps(offsets=offsets, shortest_edge=shortest, valid_mask=valid)
