"""palps: point-supervised active learning for single-class object detection.

Core pieces: dataset manifests and preprocessing (:mod:`palps.dataset`),
a detector contract with a deterministic synthetic implementation
(:mod:`palps.detector`), click-guided proposal filtering and uncertainty
scoring (:mod:`palps.sampling`), annotation oracles and the cost ledger
(:mod:`palps.oracle`), the active learning loop (:mod:`palps.engine`),
detection evaluation (:mod:`palps.evaluation`), an HTTP annotation service
(:mod:`palps.service`) and the ``palps`` CLI (:mod:`palps.cli`).
"""

__version__ = "0.1.0"

from .geometry import BoundingBox, ClickPoint
from .dataset import DatasetManifest, ImageRecord, RpfParams
from .engine import RunConfig, run, replay

__all__ = [
    "BoundingBox",
    "ClickPoint",
    "DatasetManifest",
    "ImageRecord",
    "RpfParams",
    "RunConfig",
    "run",
    "replay",
    "__version__",
]
