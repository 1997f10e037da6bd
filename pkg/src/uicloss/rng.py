"""Seeded random streams.

All randomness goes through :func:`substream`.  A stream is a Philox
(counter-based) generator keyed by a ``SeedSequence`` whose entropy is the
user seed and whose spawn key is the tuple of stream labels, each label
mapped to a 32-bit integer (ints are used as-is, strings through SHA-256).
The same ``(seed, *labels)`` therefore always yields the same draws, no
matter which thread or in which order the stream is created.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if label < 0:
            raise ValueError("integer stream labels must be non-negative")
        return int(label) & 0xFFFFFFFF
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def substream(seed: int, *labels) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(x) for x in labels))
    return np.random.Generator(np.random.Philox(seq))
