"""Foreground mask extraction for leaf photographs.

The pipeline assumes a leaf photographed against a plain, contrasting
background: grayscale conversion, Gaussian blur plus Canny edge extraction
(the blur is the first step of :func:`leafattack.edgeops.canny`, driven by the
same sigma the metrics use), dilation and closing to seal small contour gaps,
then filling the largest closed contour.
"""

from __future__ import annotations

from .edgeops import EdgeParams, canny, close, dilate, largest_contour_fill
from .errors import LeafAttackError, MaskGenerationError
from .raster import BinaryMask, LeafAsset, RasterImage, Species, read_image, read_mask, to_grayscale

MIN_LEAF_SIDE = 16


def generate_leaf_mask(leaf_img: RasterImage, params: EdgeParams | None = None) -> BinaryMask:
    """Build a binary foreground mask for a leaf image.

    Raises MaskGenerationError naming the failing stage; in particular a blank
    or near-uniform image fails at the "canny" stage with no edges.
    """
    params = params or EdgeParams()
    if leaf_img.width < MIN_LEAF_SIDE or leaf_img.height < MIN_LEAF_SIDE:
        raise ValueError(
            f"leaf image must be at least {MIN_LEAF_SIDE}x{MIN_LEAF_SIDE}, "
            f"got {leaf_img.width}x{leaf_img.height}"
        )

    def stage(name: str, fn, *args):
        try:
            return fn(*args)
        except MaskGenerationError:
            raise
        except (LeafAttackError, ValueError) as exc:
            raise MaskGenerationError(name, str(exc)) from exc

    gray = stage("grayscale", to_grayscale, leaf_img)
    edges = stage("canny", canny, gray, params.low, params.high, params.sigma)
    if edges.area == 0:
        raise MaskGenerationError("canny", "no edges detected")
    thick = stage("dilate", dilate, edges, params.dilate_radius, params.dilate_iterations)
    closed = stage("close", close, thick, params.close_radius)
    filled = stage("fill", largest_contour_fill, closed)
    if filled.area == 0:
        raise MaskGenerationError("fill", "largest contour filled to an empty region")
    return filled


def make_leaf_asset(
    species: Species,
    image_path,
    mask_path=None,
    params: EdgeParams | None = None,
) -> LeafAsset:
    """Load a leaf image and pair it with a mask, generating one when not given."""
    image = read_image(image_path)
    if mask_path is not None:
        mask = read_mask(mask_path)
    else:
        mask = generate_leaf_mask(image, params)
    return LeafAsset(species=species, image=image, mask=mask)
