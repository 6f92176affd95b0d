"""Axis-aligned box and point primitives used by filtering, NMS and AP.

All operations are pure functions on immutable values, so they are safe to
call concurrently. Coordinates are real-valued pixels, origin at the image's
top-left corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ClickPoint:
    """A single object-center click in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"click coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with positive extent and non-negative coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if min(coords) < 0:
            raise ValueError(f"box coordinates must be >= 0, got {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive width and height, got {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


def area(b: BoundingBox) -> float:
    """Box area in square pixels; always positive."""
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def center(b: BoundingBox) -> ClickPoint:
    """Midpoint of the box along each axis."""
    return ClickPoint((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)


def contains(b: BoundingBox, p: ClickPoint) -> bool:
    """Closed-interval containment: points on the boundary count as inside."""
    return b.x_min <= p.x <= b.x_max and b.y_min <= p.y <= b.y_max


def euclidean_distance(a: ClickPoint, b: ClickPoint) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union in [0, 1]; 0 for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = area(a) + area(b) - inter
    return inter / union
