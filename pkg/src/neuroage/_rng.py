"""Deterministic random streams.

One 64-bit seed drives every random draw in a run.  Streams are derived
from a counter-based generator keyed on (seed, stream id), so the same
seed produces the same values on every platform regardless of draw order
elsewhere.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream_id], dtype=np.uint64)))
