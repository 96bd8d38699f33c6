"""Named, reproducible random streams derived from a single seed.

Every stochastic site asks for ``stream(seed, "label", ...)``. The label and
any integer coordinates are folded into a Philox key, so two sites never share
a stream and re-deriving the same label replays the same draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(parts: tuple) -> list[int]:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def stream(seed: int, *labels) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=_label_key(labels))
    return np.random.Generator(np.random.Philox(seq))
