"""Named random streams on a counter-based generator.

Every random choice in the package flows from a single 64-bit seed through
named sub-streams (chain, replicate, generation, ...).  Streams are backed
by Philox, a counter-based generator, so a given (seed, path) pair yields
the same draws on every platform and under any execution schedule.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _digest(seed: int, path: tuple) -> bytes:
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for part in path:
        h.update(b"/")
        h.update(str(part).encode("utf-8"))
    return h.digest()


def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator keyed by ``seed`` and a name path.

    ``substream(7, "chain", 0)`` and ``substream(7, "chain", 1)`` are
    statistically independent; the same arguments always reproduce the
    same stream.
    """
    key = int.from_bytes(_digest(seed, path), "little") >> 6  # 250-bit Philox key
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *path) -> int:
    """Stable non-negative 63-bit sub-seed for components that take a scalar seed."""
    return int.from_bytes(_digest(seed, path)[:8], "little") >> 1
