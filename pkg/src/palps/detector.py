"""Detector contract, deterministic synthetic detector, and NMS.

The engine only ever sees the two-method contract below: ``train`` consumes
the full labeled pool and returns an opaque model state; ``detect`` maps a
model state and an image to scored region proposals plus post-processed
detections. The synthetic implementation stands in for a real two-stage
network at desk scale; a real detector attaches through the wire protocol in
:mod:`palps.wire`.

``detect`` is read-only on the model state and may run concurrently across
images; ``train`` must not overlap any ``detect`` call (the engine enforces
this).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

from .dataset import ImageRecord
from .geometry import BoundingBox, iou
from .rng import stream


@dataclass(frozen=True)
class RegionProposal:
    """A candidate object box with an objectness score in [0, 1]."""

    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class Detection:
    """A final predicted box with its confidence score."""

    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectorOutput:
    image_id: str
    proposals: tuple[RegionProposal, ...]
    detections: tuple[Detection, ...]


LabeledExample = tuple[ImageRecord, Sequence[BoundingBox]]


class Detector(Protocol):
    def train(self, labeled: Sequence[LabeledExample]) -> Any:
        """Fit on the full labeled pool and return an opaque model state."""

    def detect(self, model_state: Any, image: ImageRecord) -> DetectorOutput:
        """Score one image; deterministic given (model_state, image, seed)."""


def nms(proposals: Sequence[RegionProposal], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression.

    Repeatedly keeps the highest-score remaining proposal and suppresses all
    remaining proposals whose IoU with it strictly exceeds the threshold.
    Ties are broken by (score desc, x_min asc, y_min asc, then the remaining
    coordinates) -- a total order, so the result never depends on input order.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    ordered = sorted(
        proposals,
        key=lambda p: (-p.score, p.box.x_min, p.box.y_min, p.box.x_max, p.box.y_max),
    )
    kept: list[Detection] = []
    for p in ordered:
        if all(iou(p.box, k.box) <= iou_threshold for k in kept):
            kept.append(Detection(box=p.box, score=p.score))
    return kept


@dataclass(frozen=True)
class SyntheticDetectorParams:
    """Behavior of the stand-in detector.

    ``skill_tau`` is the learning-curve time constant: skill after training
    on n images is 1 - exp(-n / skill_tau). Score noise scales with
    (1 - skill) * (0.5 + difficulty), so hard images stay noisy the longest,
    which is what gives uncertainty sampling something to find.
    """

    proposals_per_object: int = 5
    center_jitter_frac: float = 0.08
    size_jitter_frac: float = 0.10
    false_positive_rate: float = 1.0
    skill_tau: float = 150.0
    noise_scale: float = 0.15
    nms_iou: float = 0.5
    detection_floor: float = 0.5

    def __post_init__(self) -> None:
        if self.proposals_per_object < 1:
            raise ValueError("proposals_per_object must be >= 1")
        if self.center_jitter_frac < 0 or self.size_jitter_frac < 0 or self.noise_scale < 0:
            raise ValueError("jitter and noise scales must be non-negative")
        if self.false_positive_rate < 0:
            raise ValueError("false_positive_rate must be >= 0")
        if self.skill_tau <= 0:
            raise ValueError("skill_tau must be positive")
        if not (0.0 < self.nms_iou < 1.0):
            raise ValueError("nms_iou must be in (0, 1)")
        if not (0.0 <= self.detection_floor <= 1.0):
            raise ValueError("detection_floor must be in [0, 1]")


@dataclass(frozen=True)
class SyntheticModelState:
    """Opaque state of the synthetic detector.

    ``difficulty_exposure`` is the mean difficulty of the images trained on;
    it controls how much of an image's difficulty penalty the model has
    learned away, so training on hard images pays off on hard images.
    """

    n_labeled: int
    skill: float
    difficulty_exposure: float

    @classmethod
    def initial(cls) -> "SyntheticModelState":
        return cls(n_labeled=0, skill=0.0, difficulty_exposure=0.0)


def skill_from_count(n: int, tau: float) -> float:
    """Saturating learning curve 1 - exp(-n / tau); 0 at n=0, -> 1 as n grows."""
    if n < 0:
        raise ValueError("labeled count must be >= 0")
    return 1.0 - math.exp(-n / tau)


class SyntheticDetector:
    """Deterministic stand-in for a two-stage detector.

    For each ground-truth box it emits ``proposals_per_object`` jittered
    proposals; scores are a skill/difficulty-dependent base plus Gaussian
    noise, clamped to [0, 1]. Poisson-distributed false positives get low
    scores. Detections are NMS over the proposals, thresholded at
    ``detection_floor``. All draws flow from named streams keyed by
    (seed, image id, model identity), so output is byte-stable no matter the
    iteration order.
    """

    def __init__(self, params: SyntheticDetectorParams | None = None, seed: int = 0) -> None:
        self.params = params or SyntheticDetectorParams()
        self.seed = seed

    def train(self, labeled: Sequence[LabeledExample]) -> SyntheticModelState:
        if not labeled:
            raise ValueError("cannot train on an empty labeled set")
        n = len(labeled)
        exposure = sum(img.difficulty for img, _ in labeled) / n
        return SyntheticModelState(
            n_labeled=n,
            skill=skill_from_count(n, self.params.skill_tau),
            difficulty_exposure=exposure,
        )

    def detect(self, model_state: SyntheticModelState, image: ImageRecord) -> DetectorOutput:
        p = self.params
        rng = stream(self.seed, "detect", image.id, model_state.n_labeled)
        skill = model_state.skill
        d = image.difficulty
        # Residual difficulty penalty shrinks as the trained pool covers hard images.
        s_eff = skill * (1.0 - d * (1.0 - model_state.difficulty_exposure))
        s_base = 0.5 + 0.45 * s_eff
        sigma = p.noise_scale * (1.0 - skill) * (0.5 + d)

        proposals: list[RegionProposal] = []
        for gt in image.objects:
            w, h = gt.width, gt.height
            cx0, cy0 = (gt.x_min + gt.x_max) / 2.0, (gt.y_min + gt.y_max) / 2.0
            for _ in range(p.proposals_per_object):
                dx = float(rng.normal(0.0, p.center_jitter_frac * w))
                dy = float(rng.normal(0.0, p.center_jitter_frac * h))
                sw = w * max(0.05, 1.0 + float(rng.normal(0.0, p.size_jitter_frac)))
                sh = h * max(0.05, 1.0 + float(rng.normal(0.0, p.size_jitter_frac)))
                noise = float(rng.normal(0.0, sigma)) if sigma > 0 else 0.0
                score = min(1.0, max(0.0, s_base + noise))
                proposals.append(
                    RegionProposal(box=_clamped_box(cx0 + dx, cy0 + dy, sw, sh, image), score=score)
                )
        n_fp = int(rng.poisson(p.false_positive_rate))
        for _ in range(n_fp):
            fw = float(rng.uniform(0.05, 0.2)) * min(image.width, image.height)
            fh = float(rng.uniform(0.05, 0.2)) * min(image.width, image.height)
            fx = float(rng.uniform(fw / 2.0, image.width - fw / 2.0))
            fy = float(rng.uniform(fh / 2.0, image.height - fh / 2.0))
            fp_score = float(rng.uniform(0.02, 0.3)) * (1.0 - 0.5 * skill)
            proposals.append(RegionProposal(box=_clamped_box(fx, fy, fw, fh, image), score=fp_score))

        detections = tuple(
            det for det in nms(proposals, p.nms_iou) if det.score >= p.detection_floor
        )
        return DetectorOutput(image_id=image.id, proposals=tuple(proposals), detections=detections)


def _clamped_box(cx: float, cy: float, w: float, h: float, image: ImageRecord) -> BoundingBox:
    """Build a valid box of (at most) the given size, fully inside the image."""
    half_w = min(w / 2.0, image.width / 2.0)
    half_h = min(h / 2.0, image.height / 2.0)
    cx = min(max(cx, half_w), image.width - half_w)
    cy = min(max(cy, half_h), image.height - half_h)
    return BoundingBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h)
