"""From-scratch image filtering and binary morphology primitives.

Everything here operates on the containers from :mod:`leafattack.raster` and is
implemented directly over numpy: separable Gaussian blur, Sobel gradients,
Canny edge extraction, square-element dilation/erosion/closing, connected
component labeling, and contour filling. Filters use reflect-101 borders (the
edge sample is not repeated); morphology treats everything beyond the canvas
as false.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NoContourError
from .raster import BinaryMask, RasterImage


@dataclass(frozen=True)
class EdgeParams:
    """Knobs for the edge pipeline, with the package-wide defaults."""

    sigma: float = 1.4
    low: float = 50.0
    high: float = 150.0
    dilate_radius: int = 1
    dilate_iterations: int = 2
    close_radius: int = 2

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0 <= self.low < self.high <= 255 * 4:
            raise ValueError(f"need 0 <= low < high <= 1020, got low={self.low} high={self.high}")
        if self.dilate_radius < 1 or self.dilate_iterations < 1 or self.close_radius < 1:
            raise ValueError("morphology radii and iteration counts must be >= 1")

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "low": self.low,
            "high": self.high,
            "dilate_radius": self.dilate_radius,
            "dilate_iterations": self.dilate_iterations,
            "close_radius": self.close_radius,
        }


@dataclass(frozen=True, eq=False)
class GradientField:
    """Per-pixel Sobel responses; y points down, so gy grows toward the bottom."""

    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        gx = np.asarray(self.gx, dtype=np.float64)
        gy = np.asarray(self.gy, dtype=np.float64)
        if gx.shape != gy.shape or gx.ndim != 2:
            raise ValueError("gx and gy must be 2-D arrays of equal shape")
        gx = gx.copy()
        gy = gy.copy()
        gx.setflags(write=False)
        gy.setflags(write=False)
        object.__setattr__(self, "gx", gx)
        object.__setattr__(self, "gy", gy)

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)


@dataclass(frozen=True, eq=False)
class ComponentLabels:
    """Dense component labeling: 0 is background, components are 1..count."""

    labels: np.ndarray
    count: int
    sizes: tuple

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int32).copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if len(self.sizes) != self.count:
            raise ValueError("sizes must have one entry per component")


def _require_gray(img: RasterImage, op: str) -> None:
    if img.channels != 1:
        raise ValueError(f"{op} expects a grayscale image, got {img.channels} channels")


def _reflect101_indices(lo: int, hi: int, n: int) -> np.ndarray:
    """Indices lo..hi-1 folded into [0, n) by mirroring without edge repetition."""
    idx = np.arange(lo, hi)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx < n, idx, period - idx)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps over radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2 * sigma * sigma))
    return kernel / kernel.sum()


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    n = arr.shape[axis]
    idx = _reflect101_indices(-radius, n + radius, n)
    extended = np.take(arr, idx, axis=axis)
    windows = np.lib.stride_tricks.sliding_window_view(extended, len(kernel), axis=axis)
    return np.tensordot(windows, kernel, axes=([-1], [0]))


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """Separable Gaussian blur with reflect-101 borders, rounded back to 8 bits."""
    _require_gray(img, "gaussian_blur")
    kernel = gaussian_kernel(sigma)
    acc = _convolve_axis(img.data.astype(np.float64), kernel, axis=1)
    acc = _convolve_axis(acc, kernel, axis=0)
    return RasterImage(np.clip(np.floor(acc + 0.5), 0, 255).astype(np.uint8))


def sobel(img: RasterImage) -> GradientField:
    """3x3 Sobel gradients with reflect-101 borders."""
    _require_gray(img, "sobel")
    h, w = img.height, img.width
    if h < 3 or w < 3:
        raise ValueError(f"sobel needs at least 3x3 input, got {w}x{h}")
    padded = np.pad(img.data.astype(np.float64), 1, mode="reflect")

    def s(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    gx = (s(-1, 1) + 2 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2 * s(0, -1) + s(1, -1))
    gy = (s(1, -1) + 2 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2 * s(-1, 0) + s(-1, 1))
    return GradientField(gx, gy)


# Offsets along the quantized gradient direction, as (dx, dy) with y down.
_NMS_OFFSETS = {0: (1, 0), 45: (1, 1), 90: (0, 1), 135: (-1, 1)}


def _suppress_nonmaxima(field: GradientField) -> np.ndarray:
    """Keep gradient magnitudes only at ridge pixels along the gradient direction."""
    mag = field.magnitude
    h, w = mag.shape
    angle = np.degrees(np.arctan2(field.gy, field.gx)) % 180.0
    bins = np.full((h, w), 0, dtype=np.int16)
    bins[(angle >= 22.5) & (angle < 67.5)] = 45
    bins[(angle >= 67.5) & (angle < 112.5)] = 90
    bins[(angle >= 112.5) & (angle < 157.5)] = 135

    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    padded[1 : h + 1, 1 : w + 1] = mag
    keep = np.zeros((h, w), dtype=bool)
    for direction, (dx, dy) in _NMS_OFFSETS.items():
        fwd = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        bwd = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        # ">= forward, > backward" keeps exactly one pixel of an equal pair.
        keep |= (bins == direction) & (mag >= fwd) & (mag > bwd)
    return np.where(keep & (mag > 0), mag, 0.0)


def _hysteresis(suppressed: np.ndarray, low: float, high: float) -> np.ndarray:
    strong = suppressed >= high
    weak = suppressed >= low
    h, w = suppressed.shape
    visited = strong.copy()
    queue = deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and weak[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    queue.append((ny, nx))
    return visited


def canny(img: RasterImage, low: float = 50.0, high: float = 150.0, sigma: float = 1.4) -> BinaryMask:
    """Canny edges: blur, Sobel, non-maximum suppression, then hysteresis.

    Gradient direction is quantized to four bins (0/45/90/135 degrees); weak
    pixels (>= low) survive only when 8-connected to a strong pixel (>= high).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 0 <= low < high <= 255 * 4:
        raise ValueError(f"need 0 <= low < high <= 1020, got low={low} high={high}")
    blurred = gaussian_blur(img, sigma)
    field = sobel(blurred)
    suppressed = _suppress_nonmaxima(field)
    return BinaryMask(_hysteresis(suppressed, low, high))


def _shift_reduce(bits: np.ndarray, radius: int, reduce_or: bool) -> np.ndarray:
    """OR (dilate) or AND (erode) over all shifts within a square element."""
    h, w = bits.shape
    pad_value = not reduce_or
    padded = np.full((h + 2 * radius, w + 2 * radius), pad_value, dtype=bool)
    padded[radius : radius + h, radius : radius + w] = bits
    out = None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            view = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
            if out is None:
                out = view.copy()
            elif reduce_or:
                out |= view
            else:
                out &= view
    return out


def dilate(mask: BinaryMask, radius: int = 1, iterations: int = 1) -> BinaryMask:
    """Binary dilation by a (2*radius+1) square element, applied repeatedly."""
    if radius < 1 or iterations < 1:
        raise ValueError("radius and iterations must be >= 1")
    bits = mask.bits
    for _ in range(iterations):
        bits = _shift_reduce(bits, radius, reduce_or=True)
    return BinaryMask(bits)


def erode(mask: BinaryMask, radius: int = 1, iterations: int = 1) -> BinaryMask:
    """Binary erosion by a (2*radius+1) square element; beyond the canvas is false."""
    if radius < 1 or iterations < 1:
        raise ValueError("radius and iterations must be >= 1")
    bits = mask.bits
    for _ in range(iterations):
        bits = _shift_reduce(bits, radius, reduce_or=False)
    return BinaryMask(bits)


def close(mask: BinaryMask, radius: int = 1) -> BinaryMask:
    """Morphological closing (dilate, then erode) that never drops input pixels.

    The intermediate canvas is padded by the radius so that true pixels at the
    canvas border survive the erosion step, keeping the operation extensive.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    h, w = mask.bits.shape
    padded = np.zeros((h + 2 * radius, w + 2 * radius), dtype=bool)
    padded[radius : radius + h, radius : radius + w] = mask.bits
    grown = _shift_reduce(padded, radius, reduce_or=True)
    shrunk = _shift_reduce(grown, radius, reduce_or=False)
    return BinaryMask(shrunk[radius : radius + h, radius : radius + w])


_NEIGHBORS_4 = ((0, 1), (0, -1), (1, 0), (-1, 0))
_NEIGHBORS_8 = _NEIGHBORS_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


def connected_components(mask: BinaryMask, connectivity: int = 8) -> ComponentLabels:
    """Label connected true-pixel groups in raster-scan discovery order."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    neighbors = _NEIGHBORS_4 if connectivity == 4 else _NEIGHBORS_8
    bits = mask.bits
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    sizes = []
    current = 0
    for sy, sx in zip(*np.nonzero(bits)):
        if labels[sy, sx]:
            continue
        current += 1
        labels[sy, sx] = current
        size = 1
        queue = deque(((int(sy), int(sx)),))
        while queue:
            y, x = queue.popleft()
            for dy, dx in neighbors:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not labels[ny, nx]:
                    labels[ny, nx] = current
                    size += 1
                    queue.append((ny, nx))
        sizes.append(size)
    return ComponentLabels(labels, current, tuple(sizes))


def _flood_open(open_cells: np.ndarray, seeds) -> np.ndarray:
    """4-connected scanline flood over true cells of open_cells from seed coords."""
    h, w = open_cells.shape
    reached = np.zeros((h, w), dtype=bool)
    stack = [(int(y), int(x)) for y, x in seeds if open_cells[y, x]]
    while stack:
        y, x = stack.pop()
        if reached[y, x] or not open_cells[y, x]:
            continue
        x0 = x
        while x0 > 0 and open_cells[y, x0 - 1] and not reached[y, x0 - 1]:
            x0 -= 1
        x1 = x
        while x1 + 1 < w and open_cells[y, x1 + 1] and not reached[y, x1 + 1]:
            x1 += 1
        reached[y, x0 : x1 + 1] = True
        for ny in (y - 1, y + 1):
            if 0 <= ny < h:
                row = open_cells[ny, x0 : x1 + 1] & ~reached[ny, x0 : x1 + 1]
                idx = np.nonzero(row)[0]
                if idx.size:
                    starts = idx[np.insert(np.diff(idx) != 1, 0, True)]
                    for sx in starts:
                        stack.append((ny, x0 + int(sx)))
    return reached


def _component_fill(is_wall: np.ndarray) -> np.ndarray:
    """Wall pixels plus every cell not 4-connected to the canvas border around them."""
    h, w = is_wall.shape
    open_cells = ~is_wall
    seeds = []
    seeds.extend((0, x) for x in range(w))
    if h > 1:
        seeds.extend((h - 1, x) for x in range(w))
    seeds.extend((y, 0) for y in range(1, h - 1))
    if w > 1:
        seeds.extend((y, w - 1) for y in range(1, h - 1))
    outside = _flood_open(open_cells, seeds)
    return ~outside


def largest_contour_fill(edge_mask: BinaryMask) -> BinaryMask:
    """Fill every 8-connected edge component and return the largest filled region.

    A component's fill is its own pixels plus all pixels that cannot reach the
    canvas border without crossing it. Ties go to the component discovered
    first in raster order.
    """
    if edge_mask.area == 0:
        raise NoContourError("edge mask contains no pixels")
    comps = connected_components(edge_mask, connectivity=8)
    labels = comps.labels
    ys, xs = np.nonzero(edge_mask.bits)
    owner = labels[ys, xs]
    big = 1 << 30
    y_min = np.full(comps.count + 1, big, dtype=np.int64)
    y_max = np.full(comps.count + 1, -1, dtype=np.int64)
    x_min = np.full(comps.count + 1, big, dtype=np.int64)
    x_max = np.full(comps.count + 1, -1, dtype=np.int64)
    np.minimum.at(y_min, owner, ys)
    np.maximum.at(y_max, owner, ys)
    np.minimum.at(x_min, owner, xs)
    np.maximum.at(x_max, owner, xs)

    h, w = edge_mask.bits.shape
    best_bits = None
    best_area = -1
    for cid in range(1, comps.count + 1):
        bbox_area = int((y_max[cid] - y_min[cid] + 1) * (x_max[cid] - x_min[cid] + 1))
        if bbox_area < best_area:
            continue
        gy0 = max(int(y_min[cid]) - 1, 0)
        gy1 = min(int(y_max[cid]) + 1, h - 1)
        gx0 = max(int(x_min[cid]) - 1, 0)
        gx1 = min(int(x_max[cid]) + 1, w - 1)
        sub = labels[gy0 : gy1 + 1, gx0 : gx1 + 1] == cid
        fill_sub = _component_fill(sub)
        area = int(np.count_nonzero(fill_sub))
        if area > best_area:
            best_area = area
            best_bits = np.zeros((h, w), dtype=bool)
            best_bits[gy0 : gy1 + 1, gx0 : gx1 + 1] = fill_sub
    return BinaryMask(best_bits)
