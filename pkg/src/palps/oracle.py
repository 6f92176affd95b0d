"""Annotation oracles and the annotation-cost ledger.

Costs follow the published per-action timing constants (seconds): 25.5 to
draw a box, 9.0 to verify it, 7.8 to check an image for remaining objects,
3.0 to click an object center. Standard full supervision therefore costs
``7.8*Q + 34.5*b_Q`` for Q images holding b_Q objects, and the two-stage
scheme costs ``7.8*Q_W + 34.5*b_QS + 3*b_QW``. All ledger arithmetic is
exact decimal so the incremental ledger equals the closed form with no
float drift.

The ledger is single-writer: only the engine thread mutates it (submissions
from the annotation service are serialized before they reach the oracle).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal
from typing import Protocol, Sequence

from .dataset import ImageRecord
from .geometry import BoundingBox, ClickPoint
from .rng import stream
from .sampling import WeakLabelSet

SECONDS_DRAW_BOX = Decimal("25.5")
SECONDS_VERIFY_BOX = Decimal("9.0")
SECONDS_CHECK_IMAGE = Decimal("7.8")
SECONDS_CLICK = Decimal("3.0")
SECONDS_STRONG_BOX = SECONDS_DRAW_BOX + SECONDS_VERIFY_BOX  # 34.5

_CENT = Decimal("0.1")


def cost_baseline(q: int, b_q: int) -> Decimal:
    """Full-supervision cost: 7.8*Q + 34.5*b_Q seconds."""
    if q < 0 or b_q < 0:
        raise ValueError("counts must be non-negative")
    return (SECONDS_CHECK_IMAGE * q + SECONDS_STRONG_BOX * b_q).quantize(_CENT)


def cost_proposed(q_w: int, b_qw: int, b_qs: int) -> Decimal:
    """Two-stage cost: 7.8*Q_W + 34.5*b_QS + 3*b_QW seconds.

    ``b_qs`` may exceed ``b_qw``: strong-labeled objects can come from images
    weak-labeled in earlier episodes.
    """
    if q_w < 0 or b_qw < 0 or b_qs < 0:
        raise ValueError("counts must be non-negative")
    return (SECONDS_CHECK_IMAGE * q_w + SECONDS_STRONG_BOX * b_qs + SECONDS_CLICK * b_qw).quantize(_CENT)


@dataclass(frozen=True)
class CostLedger:
    """Accumulated annotation seconds, split by annotation type.

    Counters are monotone over a run. ``seconds_type2`` also carries the
    per-image checking overhead of full-supervision (baseline) batches, so a
    baseline run has ``seconds_type1 == 0`` and a two-stage run never uses
    the baseline charge -- the two cost models are never mixed.
    """

    seconds_type1: Decimal = Decimal("0.0")
    seconds_type2: Decimal = Decimal("0.0")
    images_weak: int = 0
    images_strong: int = 0
    objects_weak: int = 0
    objects_strong: int = 0

    @property
    def seconds_total(self) -> Decimal:
        return (self.seconds_type1 + self.seconds_type2).quantize(_CENT)

    def charge_weak_batch(self, images: int, objects: int) -> "CostLedger":
        """Type-1 batch: 7.8 s per image checked plus 3 s per click."""
        if images < 0 or objects < 0:
            raise ValueError("counts must be non-negative")
        extra = SECONDS_CHECK_IMAGE * images + SECONDS_CLICK * objects
        return replace(
            self,
            seconds_type1=(self.seconds_type1 + extra).quantize(_CENT),
            images_weak=self.images_weak + images,
            objects_weak=self.objects_weak + objects,
        )

    def charge_strong_batch(self, images: int, objects: int) -> "CostLedger":
        """Type-2 batch over already-clicked images: 34.5 s per box."""
        if images < 0 or objects < 0:
            raise ValueError("counts must be non-negative")
        extra = SECONDS_STRONG_BOX * objects
        return replace(
            self,
            seconds_type2=(self.seconds_type2 + extra).quantize(_CENT),
            images_strong=self.images_strong + images,
            objects_strong=self.objects_strong + objects,
        )

    def charge_baseline_batch(self, images: int, objects: int) -> "CostLedger":
        """Full-supervision batch: 7.8 s per image plus 34.5 s per box."""
        if images < 0 or objects < 0:
            raise ValueError("counts must be non-negative")
        extra = SECONDS_CHECK_IMAGE * images + SECONDS_STRONG_BOX * objects
        return replace(
            self,
            seconds_type2=(self.seconds_type2 + extra).quantize(_CENT),
            images_strong=self.images_strong + images,
            objects_strong=self.objects_strong + objects,
        )

    def to_dict(self) -> dict:
        """Seconds as exact decimal strings to avoid float-formatting drift."""
        return {
            "seconds_total": str(self.seconds_total),
            "seconds_type1": str(self.seconds_type1.quantize(_CENT)),
            "seconds_type2": str(self.seconds_type2.quantize(_CENT)),
            "images_weak": self.images_weak,
            "images_strong": self.images_strong,
            "objects_weak": self.objects_weak,
            "objects_strong": self.objects_strong,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostLedger":
        return cls(
            seconds_type1=Decimal(d["seconds_type1"]),
            seconds_type2=Decimal(d["seconds_type2"]),
            images_weak=int(d["images_weak"]),
            images_strong=int(d["images_strong"]),
            objects_weak=int(d["objects_weak"]),
            objects_strong=int(d["objects_strong"]),
        )


def ledger_update(ledger: CostLedger, event: str, images: int, objects: int) -> CostLedger:
    """Apply one batch event; see the ``charge_*`` methods for the charges."""
    if event == "weak_batch":
        return ledger.charge_weak_batch(images, objects)
    if event == "strong_batch":
        return ledger.charge_strong_batch(images, objects)
    if event == "baseline_batch":
        return ledger.charge_baseline_batch(images, objects)
    raise ValueError(f"unknown ledger event {event!r}")


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "simulated"  # "simulated" | "human"
    click_jitter_frac: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("simulated", "human"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.click_jitter_frac < 0:
            raise ValueError("click_jitter_frac must be >= 0")


_MAX_JITTER_TRIES = 1000


def annotate_type1(image: ImageRecord, cfg: OracleConfig) -> WeakLabelSet:
    """Simulate center clicks: one per ground-truth object.

    The click is the box center plus truncated-Normal jitter (std dev
    ``click_jitter_frac`` of the half-extent per axis), resampled until it
    falls strictly inside the box. Deterministic per (seed, image id).
    """
    rng = stream(cfg.seed, "type1", image.id)
    clicks = []
    for gt in image.objects:
        half_w, half_h = gt.width / 2.0, gt.height / 2.0
        cx, cy = (gt.x_min + gt.x_max) / 2.0, (gt.y_min + gt.y_max) / 2.0
        dx = dy = 0.0
        if cfg.click_jitter_frac > 0:
            for _ in range(_MAX_JITTER_TRIES):
                dx = float(rng.normal(0.0, cfg.click_jitter_frac * half_w))
                dy = float(rng.normal(0.0, cfg.click_jitter_frac * half_h))
                if abs(dx) < half_w and abs(dy) < half_h:
                    break
            else:
                dx = float(rng.uniform(-1.0, 1.0)) * half_w * 0.999
                dy = float(rng.uniform(-1.0, 1.0)) * half_h * 0.999
        clicks.append(ClickPoint(cx + dx, cy + dy))
    return WeakLabelSet(image_id=image.id, clicks=tuple(clicks))


def annotate_type2(image: ImageRecord, weak: WeakLabelSet | None, cfg: OracleConfig) -> tuple[BoundingBox, ...]:
    """Simulated strong labels: the ground-truth boxes verbatim.

    Requires the image's weak labels to exist first (strong labeling is
    defined over an already-clicked image); the boxes themselves are exact
    because annotator error modeling is out of scope.
    """
    if weak is None:
        raise ValueError(f"image {image.id!r} has no weak labels; strong labeling needs them first")
    if weak.image_id != image.id:
        raise ValueError(f"weak labels are for {weak.image_id!r}, not {image.id!r}")
    return tuple(image.objects)


class Oracle(Protocol):
    """Batch annotation source the engine queries once per episode phase."""

    def annotate_type1_batch(self, images: Sequence[ImageRecord]) -> dict[str, WeakLabelSet]: ...

    def annotate_type2_batch(
        self, items: Sequence[tuple[ImageRecord, WeakLabelSet]]
    ) -> dict[str, tuple[BoundingBox, ...]]: ...

    def annotate_direct_batch(self, images: Sequence[ImageRecord]) -> dict[str, tuple[BoundingBox, ...]]: ...


class SimulatedOracle:
    """Answers annotation queries from ground truth, deterministically."""

    def __init__(self, cfg: OracleConfig) -> None:
        if cfg.mode != "simulated":
            raise ValueError("SimulatedOracle requires mode='simulated'")
        self.cfg = cfg

    def annotate_type1_batch(self, images: Sequence[ImageRecord]) -> dict[str, WeakLabelSet]:
        return {img.id: annotate_type1(img, self.cfg) for img in images}

    def annotate_type2_batch(
        self, items: Sequence[tuple[ImageRecord, WeakLabelSet]]
    ) -> dict[str, tuple[BoundingBox, ...]]:
        return {img.id: annotate_type2(img, weak, self.cfg) for img, weak in items}

    def annotate_direct_batch(self, images: Sequence[ImageRecord]) -> dict[str, tuple[BoundingBox, ...]]:
        """Full supervision from scratch (baseline runs): exact ground truth."""
        return {img.id: tuple(img.objects) for img in images}
