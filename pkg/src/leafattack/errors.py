"""Exception types shared across the package."""


class LeafAttackError(Exception):
    """Base class for errors raised by this package."""


class ImageIOError(LeafAttackError):
    """Reading or writing an image file failed."""


class PlacementError(LeafAttackError):
    """A patch does not fit inside the base image at the requested offset."""


class PatchError(LeafAttackError):
    """Leaf patch preparation produced a degenerate (empty) patch mask."""


class NoContourError(LeafAttackError):
    """An edge map contains no pixels, so no contour can be extracted."""


class MaskGenerationError(LeafAttackError):
    """The leaf-mask pipeline failed. ``stage`` names the failing step."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class SpecLoadError(LeafAttackError):
    """A classifier definition failed to load or validate."""


class UndefinedPercentError(LeafAttackError):
    """A percentage delta is undefined because its baseline value is zero."""
