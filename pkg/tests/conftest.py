"""Shared helpers: analytic shape rasterizers and synthetic image builders.

Shapes are defined by pixel-center membership so tests can compare pipeline
output against exact analytic ground truth.
"""

import numpy as np
import pytest

from leafattack import BinaryMask, RasterImage


def disk_bits(h, w, cx, cy, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r


def ellipse_bits(h, w, cx, cy, a, b):
    """Ellipse membership with semi-axes a (x) and b (y)."""
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0


def square_bits(h, w, y0, x0, side):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y0 + side, x0:x0 + side] = True
    return m


def lobed_bits(h, w, cx, cy, base_r, amp, lobes):
    """Star-like blob: polar boundary r(theta) = base_r + amp*cos(lobes*theta)."""
    yy, xx = np.mgrid[0:h, 0:w]
    dx = xx - cx
    dy = yy - cy
    theta = np.arctan2(dy, dx)
    return np.hypot(dx, dy) <= base_r + amp * np.cos(lobes * theta)


def shape_image(bits, dark=40, light=255):
    """Render a boolean shape as a dark silhouette on a light background (RGB)."""
    img = np.full(bits.shape + (3,), light, dtype=np.uint8)
    img[bits] = dark
    return RasterImage(img)


def iou(a, b):
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_rgb(rng, h, w):
    return RasterImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def random_gray(rng, h, w):
    return RasterImage(rng.integers(0, 256, size=(h, w), dtype=np.uint8))


def flood_fill_components(bits, connectivity=8):
    """Independent component oracle: iterative flood fill, returns a label grid."""
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    if connectivity == 8:
        offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    nxt = 0
    for sy in range(h):
        for sx in range(w):
            if not bits[sy, sx] or labels[sy, sx]:
                continue
            nxt += 1
            stack = [(sy, sx)]
            labels[sy, sx] = nxt
            while stack:
                y, x = stack.pop()
                for dy, dx in offsets:
                    ny, nx_ = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx_ < w and bits[ny, nx_] and not labels[ny, nx_]:
                        labels[ny, nx_] = nxt
                        stack.append((ny, nx_))
    return labels, nxt


def make_mask(bits):
    return BinaryMask(np.asarray(bits, dtype=bool))
