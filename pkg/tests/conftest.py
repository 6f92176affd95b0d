"""Shared strategies and fixtures."""

from __future__ import annotations

from hypothesis import strategies as st

from palps.dataset import DatasetManifest, ImageRecord
from palps.detector import RegionProposal
from palps.geometry import BoundingBox, ClickPoint


@st.composite
def boxes(draw, max_coord: float = 1000.0, min_extent: float = 1e-3):
    x_min = draw(st.floats(0, max_coord - min_extent, allow_nan=False, allow_infinity=False))
    y_min = draw(st.floats(0, max_coord - min_extent, allow_nan=False, allow_infinity=False))
    w = draw(st.floats(min_extent, max_coord, allow_nan=False, allow_infinity=False))
    h = draw(st.floats(min_extent, max_coord, allow_nan=False, allow_infinity=False))
    return BoundingBox(x_min, y_min, x_min + w, y_min + h)


@st.composite
def clicks(draw, max_coord: float = 1200.0):
    x = draw(st.floats(0, max_coord, allow_nan=False, allow_infinity=False))
    y = draw(st.floats(0, max_coord, allow_nan=False, allow_infinity=False))
    return ClickPoint(x, y)


@st.composite
def proposals(draw, max_coord: float = 1000.0):
    box = draw(boxes(max_coord=max_coord))
    score = draw(st.floats(0, 1, allow_nan=False))
    return RegionProposal(box=box, score=score)


score_vectors = st.lists(st.floats(0, 1, allow_nan=False), min_size=0, max_size=12)


def make_image(image_id: str, objects=(), width=500.0, height=500.0, difficulty=0.0) -> ImageRecord:
    return ImageRecord(
        id=image_id, width=width, height=height, objects=tuple(objects), difficulty=difficulty
    )


def make_manifest(images, name="test") -> DatasetManifest:
    return DatasetManifest(name=name, images=tuple(images), class_names=("object",))
