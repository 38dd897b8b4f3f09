"""Addressable random streams.

Every stochastic draw in the simulator comes from a stream keyed by
(master seed, purpose tag, *path), e.g. ("local", t, i) for client i's
local steps in round t or ("sample", t) for the server's client sampling.
Streams are independent Philox generators, so any draw can be reproduced
in isolation and per-client work is deterministic regardless of execution
order.
"""

from __future__ import annotations

from zlib import crc32

import numpy as np

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def stream(seed: int, tag: str, *path: int) -> np.random.Generator:
    """Generator for the stream addressed by (seed, tag, *path).

    Same address, same stream: calling twice gives two generators that
    produce identical draws. Path entries must be non-negative integers.
    """
    words = [seed & _SEED_MASK, crc32(tag.encode("ascii"))]
    words.extend(int(p) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))
