"""Query scoring: click-guided proposal filtering, uncertainty metrics and
baseline query functions.

Everything here is a pure function; scoring a pool of images is
embarrassingly parallel. Only :func:`select_top_k` is a sequential reduction.

A proposal score ``p`` is treated as the Bernoulli distribution ``(p, 1-p)``
for the entropy/margin/least-confidence computations; multi-class scoring
would swap in the full distribution via the ``distribution_*`` variants.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from statistics import fmean, pvariance
from typing import Sequence

import numpy as np

from .detector import DetectorOutput, RegionProposal
from .geometry import ClickPoint, area, center, contains, euclidean_distance
from .dataset import RpfParams

log = logging.getLogger(__name__)

METHODS = ("mv", "me", "mev", "lc", "mar", "ent", "rand")
BASELINE_METHODS = ("lc", "mar", "ent", "rand")
POINT_METHODS = ("mv", "me", "mev")


@dataclass(frozen=True)
class WeakLabelSet:
    """The clicks recorded for one image; may be empty."""

    image_id: str
    clicks: tuple[ClickPoint, ...] = ()


@dataclass(frozen=True)
class FilteredProposals:
    """Per-click retained proposals, aligned with ``clicks`` by position."""

    image_id: str
    clicks: tuple[ClickPoint, ...]
    per_click: tuple[tuple[RegionProposal, ...], ...]

    @property
    def score_vectors(self) -> tuple[tuple[float, ...], ...]:
        return tuple(tuple(p.score for p in group) for group in self.per_click)


@dataclass(frozen=True)
class UncertaintyScore:
    image_id: str
    value: float
    method: str

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.value):
            raise ValueError(f"score for {self.image_id!r} is not finite")


def rpf(
    proposals: Sequence[RegionProposal],
    clicks: WeakLabelSet,
    params: RpfParams,
) -> FilteredProposals:
    """Click-guided region proposal filtering.

    A proposal is retained for a click iff it contains the click, its center
    lies within ``epsilon`` of the click, its area is at most ``alpha``, and
    it contains no *other* click. The last predicate means a proposal can
    associate with at most one click.
    """
    groups: list[tuple[RegionProposal, ...]] = []
    for i, w in enumerate(clicks.clicks):
        kept = []
        for rho in proposals:
            if not contains(rho.box, w):
                continue
            if euclidean_distance(center(rho.box), w) > params.epsilon:
                continue
            if area(rho.box) > params.alpha:
                continue
            if any(j != i and contains(rho.box, other) for j, other in enumerate(clicks.clicks)):
                continue
            kept.append(rho)
        groups.append(tuple(kept))
    return FilteredProposals(image_id=clicks.image_id, clicks=clicks.clicks, per_click=tuple(groups))


def binary_entropy(p: float) -> float:
    """Base-2 Bernoulli entropy with the 0*log(0) := 0 convention."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def categorical_entropy(dist: Sequence[float], *, require_normalized: bool = True) -> float:
    """Shannon entropy (base 2) of a probability vector.

    With ``require_normalized`` the entries must be non-negative and sum to 1
    within 1e-9; without it the entropy is computed on the vector as given
    (used to cross-check published worked examples printed unnormalized).
    """
    values = [float(p) for p in dist]
    if any(p < 0 for p in values):
        raise ValueError("probabilities must be non-negative")
    if require_normalized and abs(sum(values) - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {sum(values)}, expected 1")
    return -sum(p * math.log2(p) for p in values if p > 0)


def _per_click_variance(scores: Sequence[float]) -> float:
    if not scores:
        return 0.0
    return pvariance(scores) if len(scores) > 1 else 0.0


def _per_click_mean_entropy(scores: Sequence[float]) -> float:
    if not scores:
        return 0.0
    return fmean(binary_entropy(p) for p in scores)


def max_variance(f: FilteredProposals) -> UncertaintyScore:
    """Max over clicks of the population variance of retained scores."""
    value = max((_per_click_variance(v) for v in f.score_vectors), default=0.0)
    return UncertaintyScore(image_id=f.image_id, value=value, method="mv")


def max_entropy(f: FilteredProposals) -> UncertaintyScore:
    """Max over clicks of the mean Bernoulli entropy of retained scores."""
    value = max((_per_click_mean_entropy(v) for v in f.score_vectors), default=0.0)
    return UncertaintyScore(image_id=f.image_id, value=value, method="me")


def max_ent_var(f: FilteredProposals, lambda1: float = 1.0, lambda2: float = 4.0) -> UncertaintyScore:
    """Max over clicks of lambda1 * mean-entropy + lambda2 * variance.

    The default lambda2=4 aligns the variance range [0, 0.25] with the
    entropy range [0, 1].
    """
    value = max(
        (
            lambda1 * _per_click_mean_entropy(v) + lambda2 * _per_click_variance(v)
            for v in f.score_vectors
        ),
        default=0.0,
    )
    return UncertaintyScore(image_id=f.image_id, value=value, method="mev")


def distribution_least_confidence(dist: Sequence[float]) -> float:
    """1 minus the top probability of a (multi-class) distribution."""
    if not dist:
        raise ValueError("empty distribution")
    return 1.0 - max(dist)


def distribution_margin(dist: Sequence[float]) -> float:
    """Difference between the top two probabilities of a distribution."""
    if len(dist) < 2:
        raise ValueError("margin needs at least two probabilities")
    top = sorted(dist, reverse=True)
    return top[0] - top[1]


def baseline_least_confidence(out: DetectorOutput) -> UncertaintyScore:
    """1 - highest detection score; an image with no detections scores 1."""
    if out.detections:
        value = 1.0 - max(d.score for d in out.detections)
    else:
        value = 1.0
    return UncertaintyScore(image_id=out.image_id, value=value, method="lc")


def baseline_margin(out: DetectorOutput) -> UncertaintyScore:
    """Sum over detections of the Bernoulli margin |2p - 1|.

    Lower totals mean a more informative image, so the selector orders this
    method ascending.
    """
    value = sum(abs(2.0 * d.score - 1.0) for d in out.detections)
    return UncertaintyScore(image_id=out.image_id, value=value, method="mar")


def baseline_entropy(out: DetectorOutput, aggregate: str = "sum") -> UncertaintyScore:
    """Bernoulli entropy of detection scores, summed (or maxed) per image."""
    entropies = [binary_entropy(d.score) for d in out.detections]
    if aggregate == "sum":
        value = sum(entropies)
    elif aggregate == "max":
        value = max(entropies, default=0.0)
    else:
        raise ValueError(f"unknown aggregate {aggregate!r}")
    return UncertaintyScore(image_id=out.image_id, value=value, method="ent")


def select_top_k(
    scores: Sequence[UncertaintyScore],
    k: int,
    rng: np.random.Generator | None = None,
) -> list[str]:
    """Pick the k most informative image ids.

    Ordering is by score descending (ascending for the margin method), with
    lexicographic image-id tie-breaks so selection is a total order. The
    random method ignores values and samples without replacement from ``rng``.
    If k exceeds the pool the whole pool is returned, with a warning.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if not scores:
        return []
    methods = {s.method for s in scores}
    if len(methods) > 1:
        raise ValueError(f"mixed methods in one selection: {sorted(methods)}")
    method = next(iter(methods))
    if k > len(scores):
        log.warning("requested k=%d from a pool of %d; returning the whole pool", k, len(scores))
        k = len(scores)
    if method == "rand":
        if rng is None:
            raise ValueError("random selection requires a seeded generator")
        ids = sorted(s.image_id for s in scores)
        order = rng.permutation(len(ids))
        return [ids[i] for i in order[:k]]
    if method == "mar":
        ranked = sorted(scores, key=lambda s: (s.value, s.image_id))
    else:
        ranked = sorted(scores, key=lambda s: (-s.value, s.image_id))
    return [s.image_id for s in ranked[:k]]
