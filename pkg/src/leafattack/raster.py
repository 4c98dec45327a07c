"""Image and mask primitives: containers, file I/O, resampling, rotation, compositing.

Conventions used throughout the package: 8-bit unsigned samples, row-major
arrays with the origin at the top-left corner and the y axis pointing down,
RGB channel order, and hard (non-alpha) compositing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageIOError, PlacementError

# BT.601 luma weights for RGB -> grayscale.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class Species(str, Enum):
    """Leaf species usable as occlusion patches."""

    MAPLE = "maple"
    OAK = "oak"
    POPLAR = "poplar"


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit raster, shape (h, w) for grayscale or (h, w, 3) for RGB."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            raise ValueError(f"image data must be uint8, got {arr.dtype}")
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValueError(f"expected (h, w) or (h, w, 3) data, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be at least 1x1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"RasterImage({self.width}x{self.height}, channels={self.channels})"


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean occupancy grid with the same orientation conventions as images."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.dtype != np.bool_:
            raise ValueError(f"mask bits must be bool, got {arr.dtype}")
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask dimensions must be at least 1x1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, area={self.area})"


@dataclass(frozen=True)
class LeafAsset:
    """A leaf photograph paired with its foreground mask."""

    species: Species
    image: RasterImage
    mask: BinaryMask

    def __post_init__(self):
        if not isinstance(self.species, Species):
            raise ValueError(f"unknown species: {self.species!r}")
        if (self.image.height, self.image.width) != (self.mask.height, self.mask.width):
            raise ValueError("leaf image and mask dimensions differ")
        if self.mask.area == 0:
            raise ValueError("leaf mask is empty")


@dataclass(frozen=True)
class SignInstance:
    """A sign photograph, the mask of its face, and its ground-truth class."""

    name: str
    image: RasterImage
    sign_mask: BinaryMask
    true_label: int

    def __post_init__(self):
        if (self.image.height, self.image.width) != (self.sign_mask.height, self.sign_mask.width):
            raise ValueError("sign image and mask dimensions differ")
        if self.sign_mask.area == 0:
            raise ValueError("sign mask is empty")
        if self.true_label < 0:
            raise ValueError("true_label must be non-negative")


def to_grayscale(img: RasterImage) -> RasterImage:
    """Collapse an RGB image to single-channel luma (grayscale passes through)."""
    if img.channels == 1:
        return img
    if img.channels != 3:
        raise ValueError(f"expected 1 or 3 channels, got {img.channels}")
    rgb = img.data.astype(np.float64)
    luma = GRAY_WEIGHTS[0] * rgb[:, :, 0] + GRAY_WEIGHTS[1] * rgb[:, :, 1] + GRAY_WEIGHTS[2] * rgb[:, :, 2]
    return RasterImage(np.clip(_round_half_up(luma), 0, 255).astype(np.uint8))


def _nearest_indices(n_src: int, n_dst: int) -> np.ndarray:
    centers = (np.arange(n_dst) + 0.5) * (n_src / n_dst)
    return np.minimum(centers.astype(np.int64), n_src - 1)


def _bilinear_axis(n_src: int, n_dst: int):
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    lo_c = np.clip(lo, 0, n_src - 1)
    hi_c = np.clip(lo + 1, 0, n_src - 1)
    return lo_c, hi_c, frac


def scale(img: RasterImage, new_w: int, new_h: int, mode: str = "bilinear") -> RasterImage:
    """Resample an image to new dimensions; mode is "bilinear" or "nearest"."""
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target dimensions must be positive, got {new_w}x{new_h}")
    if mode not in ("bilinear", "nearest"):
        raise ValueError(f"unknown resampling mode: {mode!r}")
    if mode == "nearest":
        yi = _nearest_indices(img.height, new_h)
        xi = _nearest_indices(img.width, new_w)
        return RasterImage(img.data[np.ix_(yi, xi)])
    y0, y1, ty = _bilinear_axis(img.height, new_h)
    x0, x1, tx = _bilinear_axis(img.width, new_w)
    src = img.data.astype(np.float64)
    if img.channels == 3:
        ty = ty[:, None, None]
        tx = tx[None, :, None]
    else:
        ty = ty[:, None]
        tx = tx[None, :]
    top = src[np.ix_(y0, x0)] * (1 - tx) + src[np.ix_(y0, x1)] * tx
    bot = src[np.ix_(y1, x0)] * (1 - tx) + src[np.ix_(y1, x1)] * tx
    out = top * (1 - ty) + bot * ty
    return RasterImage(np.clip(_round_half_up(out), 0, 255).astype(np.uint8))


def scale_mask(mask: BinaryMask, new_w: int, new_h: int) -> BinaryMask:
    """Resample a mask with nearest-neighbor sampling (keeps it binary)."""
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target dimensions must be positive, got {new_w}x{new_h}")
    yi = _nearest_indices(mask.height, new_h)
    xi = _nearest_indices(mask.width, new_w)
    return BinaryMask(mask.bits[np.ix_(yi, xi)])


def _rotated_canvas(w: int, h: int, rad: float) -> tuple[int, int]:
    c, s = abs(math.cos(rad)), abs(math.sin(rad))
    return int(math.ceil(w * c + h * s)), int(math.ceil(w * s + h * c))


def rotate(img: RasterImage, mask: BinaryMask, angle_deg: float) -> tuple[RasterImage, BinaryMask]:
    """Rotate an image/mask pair counterclockwise about their common center.

    The output canvas expands to bound the rotated rectangle. Image samples are
    bilinear, mask samples nearest-neighbor; pixels with no source are black/false.
    Multiples of 90 degrees are exact axis permutations.
    """
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError("image and mask dimensions differ")
    if not 0.0 <= angle_deg < 360.0:
        raise ValueError(f"angle must lie in [0, 360), got {angle_deg}")
    if angle_deg in (0.0, 90.0, 180.0, 270.0):
        k = int(angle_deg // 90)
        return (
            RasterImage(np.rot90(img.data, k, axes=(0, 1))),
            BinaryMask(np.rot90(mask.bits, k, axes=(0, 1))),
        )

    h, w = img.height, img.width
    rad = math.radians(angle_deg)
    c, s = math.cos(rad), math.sin(rad)
    out_w, out_h = _rotated_canvas(w, h, rad)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    ox, oy = (out_w - 1) / 2.0, (out_h - 1) / 2.0

    xd, yd = np.meshgrid(np.arange(out_w), np.arange(out_h))
    vx = xd - ox
    vy = yd - oy
    # Inverse of the screen-counterclockwise rotation (y axis points down).
    sx = c * vx - s * vy + cx
    sy = s * vx + c * vy + cy

    # Bilinear sampling against a 1-pixel zero border: coordinates outside the
    # source clamp into the border and therefore contribute black.
    padded = np.zeros((h + 2, w + 2) + img.data.shape[2:], dtype=np.float64)
    padded[1 : h + 1, 1 : w + 1] = img.data
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    tx = sx - x0
    ty = sy - y0
    x0c = np.clip(x0 + 1, 0, w + 1)
    x1c = np.clip(x0 + 2, 0, w + 1)
    y0c = np.clip(y0 + 1, 0, h + 1)
    y1c = np.clip(y0 + 2, 0, h + 1)
    if img.channels == 3:
        tx = tx[:, :, None]
        ty = ty[:, :, None]
    top = padded[y0c, x0c] * (1 - tx) + padded[y0c, x1c] * tx
    bot = padded[y1c, x0c] * (1 - tx) + padded[y1c, x1c] * tx
    out = top * (1 - ty) + bot * ty
    out_img = RasterImage(np.clip(_round_half_up(out), 0, 255).astype(np.uint8))

    sxr = np.floor(sx + 0.5).astype(np.int64)
    syr = np.floor(sy + 0.5).astype(np.int64)
    inside = (sxr >= 0) & (sxr < w) & (syr >= 0) & (syr < h)
    out_bits = np.zeros((out_h, out_w), dtype=bool)
    out_bits[inside] = mask.bits[syr[inside], sxr[inside]]
    return out_img, BinaryMask(out_bits)


def composite(base: RasterImage, patch: RasterImage, patch_mask: BinaryMask, x: int, y: int) -> RasterImage:
    """Replace base pixels with patch pixels wherever the patch mask is true.

    (x, y) is the patch's top-left corner in base coordinates. The patch
    rectangle must lie fully inside the base image.
    """
    if (patch.height, patch.width) != (patch_mask.height, patch_mask.width):
        raise ValueError("patch image and mask dimensions differ")
    if base.channels != patch.channels:
        raise ValueError("base and patch channel counts differ")
    x, y = int(x), int(y)
    if x < 0 or y < 0 or x + patch.width > base.width or y + patch.height > base.height:
        raise PlacementError(
            f"patch {patch.width}x{patch.height} at ({x}, {y}) exceeds "
            f"base {base.width}x{base.height}"
        )
    out = base.data.copy()
    region = out[y : y + patch.height, x : x + patch.width]
    region[patch_mask.bits] = patch.data[patch_mask.bits]
    return RasterImage(out)


_SUFFIX_MODES = {".png": ("L", "RGB"), ".pgm": ("L",), ".ppm": ("RGB",)}


def read_image(path) -> RasterImage:
    """Load a PNG, PGM, or PPM file as an 8-bit raster."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                raise ImageIOError(f"{path}: unsupported image mode {im.mode!r} (need 8-bit gray or RGB)")
            return RasterImage(np.asarray(im, dtype=np.uint8))
    except ImageIOError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageIOError(f"{path}: {exc}") from exc


def write_image(img: RasterImage, path) -> None:
    """Write an image as PNG, PGM (grayscale), or PPM (RGB) based on the suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in _SUFFIX_MODES:
        raise ImageIOError(f"{path}: unsupported output format {suffix!r} (use .png, .pgm, or .ppm)")
    mode = "L" if img.channels == 1 else "RGB"
    if mode not in _SUFFIX_MODES[suffix]:
        raise ImageIOError(f"{path}: cannot store a {mode} image in {suffix}")
    try:
        Image.fromarray(img.data, mode=mode).save(path)
    except OSError as exc:
        raise ImageIOError(f"{path}: {exc}") from exc


def read_mask(path) -> BinaryMask:
    """Load a mask file (single-channel image; nonzero pixels are true)."""
    img = read_image(path)
    if img.channels != 1:
        raise ImageIOError(f"{path}: mask files must be single-channel")
    return BinaryMask(img.data != 0)


def write_mask(mask: BinaryMask, path) -> None:
    """Write a mask as a single-channel image (false=0, true=255)."""
    write_image(RasterImage(np.where(mask.bits, 255, 0).astype(np.uint8)), path)
