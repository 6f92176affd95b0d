"""Dataset manifests, preprocessing, statistics and filter-parameter tuning.

A manifest is annotation-only: image rasters are never decoded here. The
``image_uri`` field is passed through untouched for UI display. Manifest
values are immutable after load, so concurrent reads are safe.

Manifest file format (UTF-8 JSON)::

    {
      "format_version": 1,
      "name": "...",
      "class_names": ["panicle"],
      "images": [
        {"id": "...", "width": W, "height": H,
         "difficulty": 0.0,            # optional, default 0
         "image_uri": "...",           # optional
         "objects": [{"x_min": ..., "y_min": ..., "x_max": ..., "y_max": ...}]}
      ]
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO, Iterable, Literal

import numpy as np

from .geometry import BoundingBox, center, euclidean_distance, area
from .rng import stream

MANIFEST_FORMAT_VERSION = 1


class ManifestError(ValueError):
    """Raised for malformed or invariant-violating manifest documents."""


class PackingError(RuntimeError):
    """Raised when synthetic object placement cannot satisfy the separation
    constraint within the retry budget."""


@dataclass(frozen=True)
class ImageRecord:
    """One image's identity, dimensions, ground truth and synthetic difficulty."""

    id: str
    width: float
    height: float
    objects: tuple[BoundingBox, ...] = ()
    difficulty: float = 0.0
    image_uri: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("image id must be non-empty")
        if not (self.width > 0 and self.height > 0):
            raise ManifestError(f"image {self.id!r}: dimensions must be positive")
        if not (0.0 <= self.difficulty <= 1.0):
            raise ManifestError(f"image {self.id!r}: difficulty must be in [0, 1]")
        for box in self.objects:
            if box.x_max > self.width or box.y_max > self.height:
                raise ManifestError(f"image {self.id!r}: object box {box} outside image bounds")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    images: tuple[ImageRecord, ...]
    class_names: tuple[str, ...] = ("object",)

    def __post_init__(self) -> None:
        if not self.images:
            raise ManifestError("manifest must contain at least one image")
        seen: set[str] = set()
        for img in self.images:
            if img.id in seen:
                raise ManifestError(f"duplicate image id {img.id!r}")
            seen.add(img.id)

    def image_ids(self) -> tuple[str, ...]:
        return tuple(img.id for img in self.images)

    def by_id(self) -> dict[str, ImageRecord]:
        return {img.id: img for img in self.images}

    def total_objects(self) -> int:
        return sum(len(img.objects) for img in self.images)


@dataclass(frozen=True)
class DatasetStats:
    """Distributions used to tune the proposal filter.

    ``min_pairwise_center_distances`` holds one entry per image with at least
    two objects: the smallest center-to-center distance in that image.
    ``box_areas`` holds one entry per object.
    """

    min_pairwise_center_distances: tuple[float, ...]
    box_areas: tuple[float, ...]


@dataclass(frozen=True)
class RpfParams:
    """Proposal-filter search radius (pixels) and max proposal area (px^2)."""

    epsilon: float
    alpha: float

    def __post_init__(self) -> None:
        if not (self.epsilon > 0 and self.alpha > 0):
            raise ValueError("epsilon and alpha must be strictly positive")


# --- manifest (de)serialization -------------------------------------------


def _box_from_dict(d: dict, image_id: str) -> BoundingBox:
    try:
        return BoundingBox(float(d["x_min"]), float(d["y_min"]), float(d["x_max"]), float(d["y_max"]))
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"image {image_id!r}: malformed object entry {d!r}") from exc
    except ValueError as exc:
        raise ManifestError(f"image {image_id!r}: {exc}") from exc


def box_to_dict(b: BoundingBox) -> dict:
    return {"x_min": b.x_min, "y_min": b.y_min, "x_max": b.x_max, "y_max": b.y_max}


def image_from_dict(d: dict, *, clip_boxes: bool = False) -> ImageRecord:
    image_id = str(d.get("id", ""))
    try:
        width = float(d["width"])
        height = float(d["height"])
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"image {image_id!r}: missing or malformed dimensions") from exc
    boxes = []
    for entry in d.get("objects", []):
        box = _box_from_dict(entry, image_id)
        if clip_boxes:
            clipped = _clip_box(box, width, height)
            if clipped is None:
                continue
            box = clipped
        boxes.append(box)
    return ImageRecord(
        id=image_id,
        width=width,
        height=height,
        objects=tuple(boxes),
        difficulty=float(d.get("difficulty", 0.0)),
        image_uri=d.get("image_uri"),
    )


def _clip_box(b: BoundingBox, width: float, height: float) -> BoundingBox | None:
    x_min = min(max(b.x_min, 0.0), width)
    y_min = min(max(b.y_min, 0.0), height)
    x_max = min(max(b.x_max, 0.0), width)
    y_max = min(max(b.y_max, 0.0), height)
    if x_min >= x_max or y_min >= y_max:
        return None
    return BoundingBox(x_min, y_min, x_max, y_max)


def image_to_dict(img: ImageRecord) -> dict:
    d: dict = {"id": img.id, "width": img.width, "height": img.height}
    if img.difficulty:
        d["difficulty"] = img.difficulty
    if img.image_uri is not None:
        d["image_uri"] = img.image_uri
    d["objects"] = [box_to_dict(b) for b in img.objects]
    return d


def manifest_from_dict(doc: dict, *, clip_boxes: bool = False) -> DatasetManifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest document must be a JSON object")
    version = doc.get("format_version")
    if version != MANIFEST_FORMAT_VERSION:
        raise ManifestError(f"unsupported or missing format_version: {version!r}")
    images = tuple(image_from_dict(d, clip_boxes=clip_boxes) for d in doc.get("images", []))
    return DatasetManifest(
        name=str(doc.get("name", "")),
        images=images,
        class_names=tuple(doc.get("class_names", ("object",))),
    )


def manifest_to_dict(m: DatasetManifest) -> dict:
    return {
        "format_version": MANIFEST_FORMAT_VERSION,
        "name": m.name,
        "class_names": list(m.class_names),
        "images": [image_to_dict(img) for img in m.images],
    }


def load_manifest(source: str | Path | bytes | BinaryIO, *, clip_boxes: bool = False) -> DatasetManifest:
    """Parse and validate a manifest document.

    ``source`` may be a path, raw bytes, or a readable binary stream. In the
    default strict mode an out-of-bounds box is a validation error naming the
    offending image; with ``clip_boxes=True`` boxes are clipped to the image
    and dropped if they collapse.
    """
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"manifest is not valid UTF-8 JSON: {exc}") from exc
    return manifest_from_dict(doc, clip_boxes=clip_boxes)


def save_manifest(m: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(m), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- preprocessing ----------------------------------------------------------


def downsample(m: DatasetManifest, factor: float) -> DatasetManifest:
    """Divide all coordinates and image dimensions by ``factor``."""
    if not (factor > 0):
        raise ValueError("downsample factor must be positive")
    if factor == 1:
        return m
    images = []
    for img in m.images:
        boxes = tuple(
            BoundingBox(b.x_min / factor, b.y_min / factor, b.x_max / factor, b.y_max / factor)
            for b in img.objects
        )
        images.append(replace(img, width=img.width / factor, height=img.height / factor, objects=boxes))
    return replace(m, images=tuple(images))


PartialPolicy = Literal["drop_image", "drop_object"]


def slice_tiles(
    m: DatasetManifest,
    tile_w: float,
    tile_h: float,
    partial_policy: PartialPolicy = "drop_image",
) -> DatasetManifest:
    """Cut each image into a non-overlapping grid of ``tile_w`` x ``tile_h`` tiles.

    Trailing remainder tiles (image size not a multiple of the tile size) are
    discarded. An object belongs to a tile iff it lies fully inside it; an
    object that straddles a tile edge is "partial" for every tile whose
    interior it overlaps. Under ``drop_image`` a tile with any partial object,
    or with no objects at all, is discarded entirely; under ``drop_object``
    partial objects lose their annotations and the tile is kept only if at
    least one object remains.
    """
    if not (tile_w > 0 and tile_h > 0):
        raise ValueError("tile dimensions must be positive")
    if partial_policy not in ("drop_image", "drop_object"):
        raise ValueError(f"unknown partial policy {partial_policy!r}")
    tiles: list[ImageRecord] = []
    for img in m.images:
        n_cols = int(img.width // tile_w)
        n_rows = int(img.height // tile_h)
        for row in range(n_rows):
            for col in range(n_cols):
                tx0, ty0 = col * tile_w, row * tile_h
                tx1, ty1 = tx0 + tile_w, ty0 + tile_h
                inside: list[BoundingBox] = []
                has_partial = False
                for b in img.objects:
                    if b.x_min >= tx0 and b.y_min >= ty0 and b.x_max <= tx1 and b.y_max <= ty1:
                        inside.append(BoundingBox(b.x_min - tx0, b.y_min - ty0, b.x_max - tx0, b.y_max - ty0))
                    elif min(b.x_max, tx1) > max(b.x_min, tx0) and min(b.y_max, ty1) > max(b.y_min, ty0):
                        has_partial = True
                if partial_policy == "drop_image" and (has_partial or not inside):
                    continue
                if partial_policy == "drop_object" and not inside:
                    continue
                tiles.append(
                    ImageRecord(
                        id=f"{img.id}_r{row}c{col}",
                        width=tile_w,
                        height=tile_h,
                        objects=tuple(inside),
                        difficulty=img.difficulty,
                        image_uri=img.image_uri,
                    )
                )
    if not tiles:
        raise ManifestError("slicing discarded every tile; nothing left in the manifest")
    return replace(m, images=tuple(tiles))


# --- statistics and tuning --------------------------------------------------


def compute_stats(m: DatasetManifest) -> DatasetStats:
    """Collect the two distributions the filter parameters are tuned from."""
    distances: list[float] = []
    areas: list[float] = []
    for img in m.images:
        centers = [center(b) for b in img.objects]
        areas.extend(area(b) for b in img.objects)
        if len(centers) >= 2:
            best = math.inf
            for i in range(len(centers)):
                for j in range(i + 1, len(centers)):
                    best = min(best, euclidean_distance(centers[i], centers[j]))
            distances.append(best)
    return DatasetStats(tuple(distances), tuple(areas))


def percentile(xs: Iterable[float], p: float) -> float:
    """Linear interpolation between closest ranks (inclusive definition)."""
    values = np.asarray(list(xs), dtype=float)
    if values.size == 0:
        raise ValueError("percentile of an empty sequence")
    return float(np.percentile(values, p, method="linear"))


Rounding = Literal["none", "one_sig_fig", "two_sig_figs"]


def round_sig(value: float, digits: int) -> float:
    """Round to ``digits`` significant figures (half-to-even on exact ties)."""
    if value == 0:
        return 0.0
    magnitude = math.floor(math.log10(abs(value)))
    factor = 10.0 ** (magnitude - digits + 1)
    return round(value / factor) * factor


def tune_rpf_params(
    s: DatasetStats,
    eps_percentile: float = 20.0,
    alpha_percentile: float = 90.0,
    rounding: Rounding = "two_sig_figs",
) -> RpfParams:
    """Pick the search radius and area cap from the dataset distributions.

    Epsilon is the ``eps_percentile`` of per-image minimum center distances
    and alpha the ``alpha_percentile`` of box areas. ``one_sig_fig`` rounding
    reproduces the hand-rounded published anchors (18 -> 20, 20448 -> 20000);
    ``two_sig_figs`` keeps more precision (1404 -> 1400).
    """
    if not s.min_pairwise_center_distances:
        raise ValueError("no image has two or more objects; epsilon cannot be tuned")
    if not s.box_areas:
        raise ValueError("dataset has no objects; alpha cannot be tuned")
    eps = percentile(s.min_pairwise_center_distances, eps_percentile)
    alpha = percentile(s.box_areas, alpha_percentile)
    if rounding == "one_sig_fig":
        eps, alpha = round_sig(eps, 1), round_sig(alpha, 1)
    elif rounding == "two_sig_figs":
        eps, alpha = round_sig(eps, 2), round_sig(alpha, 2)
    elif rounding != "none":
        raise ValueError(f"unknown rounding mode {rounding!r}")
    return RpfParams(epsilon=eps, alpha=alpha)


# --- synthetic dataset generator --------------------------------------------


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the desk-scale synthetic dataset generator."""

    num_images: int
    width: float = 500.0
    height: float = 500.0
    objects_per_image: tuple[int, int] = (3, 8)
    box_size_range: tuple[float, float] = (30.0, 80.0)
    min_center_separation: float = 0.0
    difficulty_range: tuple[float, float] = (0.0, 1.0)
    name: str = "synthetic"
    max_placement_retries: int = 500

    def __post_init__(self) -> None:
        lo, hi = self.objects_per_image
        if self.num_images < 1 or lo < 0 or hi < lo:
            raise ValueError("invalid image or object counts")
        smin, smax = self.box_size_range
        if not (0 < smin <= smax <= min(self.width, self.height)):
            raise ValueError("box sizes must be positive and fit inside the image")
        dlo, dhi = self.difficulty_range
        if not (0.0 <= dlo <= dhi <= 1.0):
            raise ValueError("difficulty range must lie within [0, 1]")


def generate_synthetic(config: SyntheticConfig, seed: int) -> DatasetManifest:
    """Deterministically generate a manifest matching ``config`` under ``seed``.

    Object centers respect ``min_center_separation``; placement is rejection
    sampled with a bounded retry budget and fails loudly when the requested
    density cannot be packed.
    """
    images = []
    n_digits = max(4, len(str(config.num_images)))
    for i in range(config.num_images):
        rng = stream(seed, "synthetic-image", i)
        difficulty = float(rng.uniform(*config.difficulty_range))
        lo, hi = config.objects_per_image
        n_objects = int(rng.integers(lo, hi + 1))
        centers: list[tuple[float, float]] = []
        boxes: list[BoundingBox] = []
        for _ in range(n_objects):
            for attempt in range(config.max_placement_retries + 1):
                w = float(rng.uniform(*config.box_size_range))
                h = float(rng.uniform(*config.box_size_range))
                cx = float(rng.uniform(w / 2.0, config.width - w / 2.0))
                cy = float(rng.uniform(h / 2.0, config.height - h / 2.0))
                if all(
                    math.hypot(cx - ox, cy - oy) >= config.min_center_separation
                    for ox, oy in centers
                ):
                    centers.append((cx, cy))
                    boxes.append(BoundingBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0))
                    break
                if attempt == config.max_placement_retries:
                    raise PackingError(
                        f"image {i}: could not place object {len(boxes) + 1}/{n_objects} "
                        f"with separation {config.min_center_separation}"
                    )
        images.append(
            ImageRecord(
                id=f"img{i:0{n_digits}d}",
                width=config.width,
                height=config.height,
                objects=tuple(boxes),
                difficulty=difficulty,
            )
        )
    return DatasetManifest(name=config.name, images=tuple(images), class_names=("object",))
