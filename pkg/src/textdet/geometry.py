"""Exact 2-D primitives: areas, convex clipping, IoU, minimum-area rotated
rectangles and rotated-box reconstruction.

Coordinates follow the image convention: x grows rightward, y grows
downward.  Quads are (4, 2) float arrays whose vertices run clockwise as
seen on screen, which makes the raw shoelace sum positive.  A rotation by
theta uses the matrix [[cos, -sin], [sin, cos]] applied directly to image
coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeDistance, NonConvexInput, ZeroArea

QUARTER_PI = math.pi / 4.0


def as_quad(vertices) -> np.ndarray:
    """Coerce to a (4, 2) float64 array and check finiteness."""
    q = np.asarray(vertices, dtype=np.float64).reshape(4, 2)
    if not np.all(np.isfinite(q)):
        raise ValueError("quad vertices must be finite")
    return q


def signed_area(poly) -> float:
    """Shoelace signed area; positive for screen-clockwise vertex order."""
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    """Absolute shoelace area in pixels^2; 0 for degenerate polygons."""
    return abs(signed_area(poly))


def quad_edge_lengths(q) -> np.ndarray:
    """Lengths of the four edges p_i -> p_{i+1}."""
    q = np.asarray(q, dtype=np.float64)
    return np.linalg.norm(np.roll(q, -1, axis=0) - q, axis=1)


def is_convex(quad, tol: float = 1e-12) -> bool:
    """True when no vertex is reflex (cross products share one sign)."""
    q = np.asarray(quad, dtype=np.float64)
    e = np.roll(q, -1, axis=0) - q
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    scale = max(1.0, float(np.abs(e).max()) ** 2)
    return bool(np.all(cross >= -tol * scale) or np.all(cross <= tol * scale))


def _require_convex(quad) -> None:
    if not is_convex(quad):
        raise NonConvexInput(f"quad has a reflex vertex: {np.asarray(quad).tolist()}")


def _clip_area(subject, clip) -> float:
    """Area of subject ∩ clip via Sutherland-Hodgman on python floats.

    Both inputs must be convex and oriented with positive signed area.
    """
    poly = subject
    for i in range(len(clip)):
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % len(clip)]
        ex, ey = bx - ax, by - ay
        out = []
        n = len(poly)
        if n == 0:
            return 0.0
        px, py = poly[-1]
        p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
        for cx, cy in poly:
            c_in = ex * (cy - ay) - ey * (cx - ax) >= 0.0
            if c_in != p_in:
                # intersection of segment (p, c) with the clip line
                dx, dy = cx - px, cy - py
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (ay - py) - ey * (ax - px)) / denom
                    out.append((px + t * dx, py + t * dy))
            if c_in:
                out.append((cx, cy))
            px, py, p_in = cx, cy, c_in
        poly = out
    if len(poly) < 3:
        return 0.0
    s = 0.0
    px, py = poly[-1]
    for cx, cy in poly:
        s += px * cy - cx * py
        px, py = cx, cy
    return abs(s) * 0.5


def _positively_oriented(quad) -> list:
    pts = [(float(x), float(y)) for x, y in np.asarray(quad, dtype=np.float64)]
    if signed_area(pts) < 0.0:
        pts.reverse()
    return pts


def convex_intersection_area(a, b) -> float:
    """Area of a ∩ b for convex quads; 0 when disjoint."""
    _require_convex(a)
    _require_convex(b)
    return _clip_area(_positively_oriented(a), _positively_oriented(b))


def quad_iou(a, b) -> float:
    """Intersection over union of two convex, positive-area quads."""
    area_a = polygon_area(a)
    area_b = polygon_area(b)
    if area_a <= 0.0 or area_b <= 0.0:
        raise ZeroArea("quad_iou requires positive-area quads")
    inter = convex_intersection_area(a, b)
    return inter / (area_a + area_b - inter)


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull; returns hull vertices, CCW in raw axes."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points, dtype=np.float64)})
    if len(pts) <= 2:
        return np.asarray(pts, dtype=np.float64)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.asarray(lower[:-1] + upper[:-1], dtype=np.float64)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=np.float64)


def normalize_angle(theta: float) -> float:
    """Fold an edge angle into [-pi/4, pi/4) modulo 90-degree relabeling."""
    return (theta + QUARTER_PI) % (math.pi / 2.0) - QUARTER_PI


@dataclass(frozen=True)
class OrientedRect:
    """A rotated rectangle: corner quad plus its top-edge angle."""

    quad: np.ndarray  # (4, 2), clockwise starting at the rotated top-left
    theta: float  # radians in [-pi/4, pi/4)

    @property
    def area(self) -> float:
        return polygon_area(self.quad)


@dataclass(frozen=True)
class Detection:
    """A scored quad; the unit of NMS and evaluation."""

    quad: np.ndarray
    score: float


def min_area_rect(q) -> OrientedRect:
    """Minimum-area enclosing rectangle via rotating calipers on the hull.

    The angle is normalized into [-pi/4, pi/4) by relabeling which
    rectangle edge counts as "top"; corners are ordered clockwise starting
    at the (rotated) top-left.
    """
    pts = np.asarray(q, dtype=np.float64)
    if polygon_area(pts) <= 0.0:
        raise ZeroArea("min_area_rect requires a positive-area polygon")
    hull = convex_hull(pts)
    edges = np.roll(hull, -1, axis=0) - hull
    best_angle, best_area = 0.0, math.inf
    for ex, ey in edges:
        phi = math.atan2(ey, ex)
        rot = rotation_matrix(-phi)
        r = hull @ rot.T
        area = float((r[:, 0].max() - r[:, 0].min()) * (r[:, 1].max() - r[:, 1].min()))
        if area < best_area:
            best_area, best_angle = area, phi
    theta = normalize_angle(best_angle)
    rot = rotation_matrix(-theta)
    r = hull @ rot.T
    x0, x1 = r[:, 0].min(), r[:, 0].max()
    y0, y1 = r[:, 1].min(), r[:, 1].max()
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    quad = corners @ rotation_matrix(theta).T
    return OrientedRect(quad=quad, theta=theta)


def rbox_to_quad(origin, distances, theta: float) -> np.ndarray:
    """Rebuild the corner quad of a rotated box from per-pixel geometry.

    ``distances`` are (top, right, bottom, left) from ``origin`` to the box
    edges.  At theta=0 the box is axis-aligned around the origin; otherwise
    that box is rotated by theta with ``origin`` as the fixed point.
    Vertices are clockwise starting at the top-left.
    """
    d = np.asarray(distances, dtype=np.float64).reshape(4)
    if np.any(d < 0.0):
        raise NegativeDistance(f"negative boundary distance: {d.tolist()}")
    ox, oy = float(origin[0]), float(origin[1])
    d1, d2, d3, d4 = d
    local = np.array(
        [[-d4, -d1], [d2, -d1], [d2, d3], [-d4, d3]], dtype=np.float64
    )
    quad = local @ rotation_matrix(theta).T
    quad[:, 0] += ox
    quad[:, 1] += oy
    return quad
