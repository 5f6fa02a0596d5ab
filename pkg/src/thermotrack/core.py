"""Geometry and image primitives shared by every other module."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundingBox",
    "Detection",
    "GrayImage",
    "ConfigurationError",
    "DataFormatError",
    "SequencingError",
    "iou",
    "clip_to_image",
]


class ConfigurationError(ValueError):
    """Invalid configuration: thresholds, weights, histogram binning, flags."""


class DataFormatError(ValueError):
    """Malformed or internally inconsistent input data."""


class SequencingError(RuntimeError):
    """Frames were presented to a tracker out of order."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, stored as top-left corner plus size.

    Coordinates are real-valued. Degenerate (zero-area) boxes are representable
    because detectors can emit them; they overlap nothing. Non-finite
    coordinates are rejected at construction so downstream geometry never sees
    NaN or infinity.
    """

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self) -> None:
        for name in ("left", "top", "width", "height"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"non-finite bounding box coordinate: {name}={value!r}")
            object.__setattr__(self, name, value)  # plain floats, even from numpy scalars

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return max(self.width, 0.0) * max(self.height, 0.0)

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    def to_xyah(self) -> np.ndarray:
        """Return (center x, center y, aspect ratio w/h, height).

        Undefined for boxes without positive height.
        """
        if self.height <= 0.0:
            raise ValueError("aspect ratio undefined for non-positive height")
        cx, cy = self.center
        return np.array([cx, cy, self.width / self.height, self.height], dtype=float)

    @classmethod
    def from_xyah(cls, xyah) -> "BoundingBox":
        cx, cy, aspect, height = (float(v) for v in xyah)
        width = aspect * height
        return cls(cx - width / 2.0, cy - height / 2.0, width, height)


@dataclass(frozen=True)
class Detection:
    """A detector output: box, confidence score in [0, 1], integer category."""

    bbox: BoundingBox
    score: float
    class_id: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "score", float(self.score))
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"detection score {self.score!r} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel intensity grid, 8- or 16-bit.

    ``pixels`` is a (height, width) array; dtype uint8 for bit_depth 8 and
    uint16 for bit_depth 16, which makes the value-range invariant structural.
    Treat the array as read-only once wrapped.
    """

    pixels: np.ndarray
    bit_depth: int

    def __post_init__(self) -> None:
        if self.bit_depth not in (8, 16):
            raise ValueError(f"unsupported bit depth {self.bit_depth}")
        if self.pixels.ndim != 2:
            raise ValueError("image data must be a 2-D array")
        expected = np.uint8 if self.bit_depth == 8 else np.uint16
        if self.pixels.dtype != expected:
            raise ValueError(
                f"dtype {self.pixels.dtype} does not match bit depth {self.bit_depth}"
            )

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def max_value(self) -> int:
        """Exclusive upper bound of representable intensity (2^bit_depth)."""
        return 1 << self.bit_depth


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Returns 0 for disjoint or degenerate inputs (zero union area). Symmetric,
    and 1.0 for identical boxes with positive area.
    """
    inter_w = min(a.right, b.right) - max(a.left, b.left)
    inter_h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if inter_w <= 0.0 or inter_h <= 0.0:
        return 0.0
    inter = inter_w * inter_h
    # areas from the same edge differences as the intersection, so that
    # identical boxes give exactly inter == union and iou == 1.0
    area_a = max(a.right - a.left, 0.0) * max(a.bottom - a.top, 0.0)
    area_b = max(b.right - b.left, 0.0) * max(b.bottom - b.top, 0.0)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def clip_to_image(box: BoundingBox, img_w: float, img_h: float) -> BoundingBox | None:
    """Intersect ``box`` with the image rectangle [0, img_w) x [0, img_h).

    Returns None when the intersection has zero area. Never increases area.
    """
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    left = max(box.left, 0.0)
    top = max(box.top, 0.0)
    right = min(box.right, float(img_w))
    bottom = min(box.bottom, float(img_h))
    if right - left <= 0.0 or bottom - top <= 0.0:
        return None
    return BoundingBox(left, top, right - left, bottom - top)
