"""Deterministic named-stream random number generation.

Every stochastic draw in a run flows from a single per-run seed. Independent
streams are derived by hashing the seed together with a tuple of name parts
(e.g. ``("detect", image_id, n_labeled)``), so results do not depend on the
order in which images happen to be processed.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def stream(seed: int, *parts: object) -> np.random.Generator:
    """Derive an independent generator for the named stream under ``seed``."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode("utf-8"))
    for part in parts:
        h.update(_SEP)
        h.update(str(part).encode("utf-8"))
    return np.random.default_rng(int.from_bytes(h.digest(), "big"))
