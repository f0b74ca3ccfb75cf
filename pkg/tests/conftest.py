"""Shared fixtures and generators for the test suite."""

import math

import numpy as np
import pytest

from textdet.geometry import rbox_to_quad


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotated_rect(rng, image_size=128, min_side=12.0, max_side=48.0,
                        margin=4.0):
    """A random rotated rectangle quad fully inside the image, clockwise
    from the rotated top-left."""
    while True:
        w = rng.uniform(min_side, max_side)
        h = rng.uniform(min_side, max_side)
        theta = rng.uniform(-math.pi / 4, math.pi / 4)
        c, s = abs(math.cos(theta)), abs(math.sin(theta))
        ext_x = (w * c + h * s) / 2.0
        ext_y = (w * s + h * c) / 2.0
        lo_x, hi_x = margin + ext_x, image_size - margin - ext_x
        lo_y, hi_y = margin + ext_y, image_size - margin - ext_y
        if lo_x >= hi_x or lo_y >= hi_y:
            continue
        cx = rng.uniform(lo_x, hi_x)
        cy = rng.uniform(lo_y, hi_y)
        return rbox_to_quad((cx, cy), (h / 2, w / 2, h / 2, w / 2), theta)
