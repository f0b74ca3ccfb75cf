"""Deterministic synthetic scenes: noisy grayscale backgrounds with
striped rotated-rectangle regions standing in for text."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInfeasible
from .geometry import convex_intersection_area, rbox_to_quad


@dataclass(frozen=True)
class SceneConfig:
    image_size: int = 128
    min_boxes: int = 1
    max_boxes: int = 3
    min_size: float = 16.0
    max_size: float = 56.0
    min_aspect: float = 2.0
    max_aspect: float = 6.0
    angle_range: float = math.pi / 4.0
    noise_level: float = 0.1
    seed: int = 0
    margin: float = 2.0

    def __post_init__(self):
        if self.min_boxes < 0 or self.max_boxes < self.min_boxes:
            raise ValueError("invalid box count range")
        if self.max_size + 2 * self.margin > self.image_size:
            raise ValueError("boxes cannot fit inside the image with the margin")


def _scene_rng(cfg: SceneConfig, index: int) -> np.random.Generator:
    # each scene draws from its own stream so generation order is irrelevant
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))


def _sample_box(cfg: SceneConfig, rng) -> np.ndarray:
    long_side = rng.uniform(cfg.min_size, cfg.max_size)
    aspect = rng.uniform(cfg.min_aspect, cfg.max_aspect)
    short_side = max(long_side / aspect, 3.0)
    theta = rng.uniform(-cfg.angle_range, cfg.angle_range)
    # bounding extent of the rotated rect, for center placement
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    ext_x = (long_side * c + short_side * s) / 2.0
    ext_y = (long_side * s + short_side * c) / 2.0
    lo_x, hi_x = cfg.margin + ext_x, cfg.image_size - cfg.margin - ext_x
    lo_y, hi_y = cfg.margin + ext_y, cfg.image_size - cfg.margin - ext_y
    if lo_x >= hi_x or lo_y >= hi_y:
        return None
    cx = rng.uniform(lo_x, hi_x)
    cy = rng.uniform(lo_y, hi_y)
    half_w, half_h = long_side / 2.0, short_side / 2.0
    return rbox_to_quad((cx, cy), (half_h, half_w, half_h, half_w), theta)


def generate_scene(cfg: SceneConfig, index: int):
    """Build scene ``index``: (image tensor (1, S, S) float32, gt quads).

    Regions are pairwise disjoint rotated rectangles filled with a
    high-contrast stripe texture whose stripes run orthogonal to the long
    axis (period 3-5 px).  Deterministic in (seed, index).
    """
    rng = _scene_rng(cfg, index)
    size = cfg.image_size
    image = 0.5 + cfg.noise_level * rng.standard_normal((size, size))

    n_boxes = int(rng.integers(cfg.min_boxes, cfg.max_boxes + 1))
    quads: list[np.ndarray] = []
    attempts = 0
    while len(quads) < n_boxes:
        attempts += 1
        if attempts > 1000:
            raise ConfigInfeasible(
                f"could not place {n_boxes} disjoint boxes in 1000 attempts"
            )
        quad = _sample_box(cfg, rng)
        if quad is None:
            continue
        if any(convex_intersection_area(quad, q) > 0.0 for q in quads):
            continue
        quads.append(quad)
        _paint_stripes(image, quad, float(rng.uniform(3.0, 5.0)), rng)

    np.clip(image, 0.0, 1.0, out=image)
    return image.astype(np.float32)[None, :, :], quads


def _paint_stripes(image, quad, period, rng) -> None:
    size = image.shape[0]
    x0 = max(int(math.floor(quad[:, 0].min())), 0)
    x1 = min(int(math.ceil(quad[:, 0].max())) + 1, size)
    y0 = max(int(math.floor(quad[:, 1].min())), 0)
    y1 = min(int(math.ceil(quad[:, 1].max())) + 1, size)
    xs = np.arange(x0, x1) + 0.5
    ys = np.arange(y0, y1) + 0.5
    gx, gy = np.meshgrid(xs, ys)

    inside = np.ones(gx.shape, dtype=bool)
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        e = b - a
        inside &= e[0] * (gy - a[1]) - e[1] * (gx - a[0]) >= 0.0

    # long axis = direction of the longer edge (p1->p2 vs p2->p3)
    e1, e2 = quad[1] - quad[0], quad[2] - quad[1]
    axis = e1 if np.linalg.norm(e1) >= np.linalg.norm(e2) else e2
    axis = axis / np.linalg.norm(axis)
    u = gx * axis[0] + gy * axis[1]
    phase = rng.uniform(0.0, period)
    stripes = np.where(((u + phase) / period) % 1.0 < 0.5, 0.95, 0.05)
    image[y0:y1, x0:x1][inside] = stripes[inside]
