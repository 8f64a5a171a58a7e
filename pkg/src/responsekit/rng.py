"""Counter-based random substreams.

Trajectory ``k`` under master seed ``s`` always draws from the Philox stream
keyed by ``s`` with ``k`` in the high counter word, so results do not depend
on batching, chunking or thread count.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, index: int) -> np.random.Generator:
    seed = int(seed)
    key = [seed & _MASK64, (seed >> 64) & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(index)]))


def derive_seed(master: int, label: str) -> int:
    """Deterministic child seed for a named purpose (e.g. ``"fdt"``)."""
    ss = np.random.SeedSequence([int(master) & _MASK64, zlib.crc32(label.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("RESPONSEKIT_THREADS", "1")))
    except ValueError:
        return 1
