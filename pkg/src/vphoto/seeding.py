"""Named deterministic random streams.

Every sampled value in the package is drawn from a generator keyed by a root
seed plus a tuple of stream keys (stage names, file paths, indices), so any
piece of work can be re-run in isolation without replaying everything that
came before it.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key) & 0xFFFFFFFF


def stream(seed: int, *keys) -> np.random.Generator:
    """Generator for the sub-stream named by `keys` under a root seed."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(entropy)
