"""Deterministic random streams.

Every consumer gets its own counter-based Philox stream derived from
(seed, stream, substream), so trials can run in any order or in parallel
and still draw identical values.  Streams are cheap to construct; do not
share Generator objects across purposes.
"""

from __future__ import annotations

import numpy as np

# substream purposes, kept small and stable
SUB_FAILURE_TIMES = 0
SUB_FAILURE_IDS = 1
SUB_PAYLOAD = 2
SUB_GS = 3

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int = 0, substream: int = 0) -> np.random.Generator:
    if not 0 <= stream_id < (1 << 32) or not 0 <= substream < (1 << 32):
        raise ValueError("stream_id and substream must fit in 32 bits")
    key = np.array([seed & _MASK64, ((stream_id << 32) | substream) & _MASK64],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
